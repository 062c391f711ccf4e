"""End-to-end experiments and report writing.

Two experiments are supported: the whole cohort plus one model per
K-Means cluster, and one model per age band. Each model gets its own
70/30 split, 10-fold cross-validated LASSO and test-set metrics.
"""
from __future__ import annotations

import contextlib
import csv
import hashlib
import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import plotting
from .config import PipelineSettings
from .errors import (
    DegenerateSplit,
    EmptyGroup,
    IoFailure,
    NoComponents,
    NoVariance,
    RiskClusterError,
    SingleClass,
    UndefinedRate,
)
from .kmeans import ElbowCurve, KMeansModel, elbow_scan, kmeans_fit, suggest_k
from .lasso import CvResult, LassoFit, cross_validate_lambda, fit_lasso_path, predict_proba
from .metrics import RocCurve, auc_trapezoid, confusion_at_threshold, roc_curve, tnr, tpr, youden_threshold
from .pca import PcaModel, fit_pca, project
from .preprocess import (
    DesignMatrix,
    apply_standardizer,
    encode_design_matrix,
    fit_standardizer,
    impute_mother_age_clusterwise,
    impute_mother_age_global,
    outcome_vector,
    split_train_test,
)
from .schema import CLUSTERING_VARIABLES, Cohort
from .seeding import derive_seed

log = logging.getLogger(__name__)

# (model id, label, lowest age, highest age); bands are inclusive, "newborn" is age 0
AGE_GROUPS = (
    ("newborn", "Newborn", 0, 0),
    ("age_0_5", "Newborn to Five", 0, 5),
    ("age_0_10", "Newborn to Ten", 0, 10),
    ("age_0_15", "Newborn to 15", 0, 15),
    ("age_6_10", "Six to Ten", 6, 10),
    ("age_11_15", "Eleven to Fifteen", 11, 15),
)


@contextlib.contextmanager
def stage(name: str):
    try:
        yield
    except RiskClusterError as err:
        if err.stage is None:
            err.stage = name
        raise


@dataclass
class ModelResult:
    model_id: str
    label: str
    status: str = "ok"  # "ok" or "absent"
    note: str = ""
    n_train: int = 0
    n_test: int = 0
    lam: float = float("nan")
    auc: float = float("nan")
    tpr: float = float("nan")
    tnr: float = float("nan")
    threshold: float = float("nan")
    fit: LassoFit | None = field(default=None, repr=False)
    columns: tuple[str, ...] = field(default=(), repr=False)
    cv: CvResult | None = field(default=None, repr=False)
    roc: RocCurve | None = field(default=None, repr=False)


@dataclass
class ExperimentReport:
    kind: str  # "cluster" or "agegroup"
    rows: list[ModelResult]
    provenance: dict
    elbow: ElbowCurve | None = None
    kmeans: KMeansModel | None = None
    pca: PcaModel | None = None
    scores: np.ndarray | None = field(default=None, repr=False)

    def row(self, model_id: str) -> ModelResult:
        for r in self.rows:
            if r.model_id == model_id:
                return r
        raise KeyError(model_id)


def train_and_evaluate(
    design: DesignMatrix,
    y: np.ndarray,
    settings: PipelineSettings,
    seed: int,
    model_id: str,
    label: str | None = None,
) -> ModelResult:
    """Split, cross-validate a LASSO logistic model on the training part, score the test part."""
    result = ModelResult(model_id, label or model_id, columns=design.columns)
    n = len(y)
    try:
        split = split_train_test(
            n,
            settings.train_fraction,
            derive_seed(seed, "split"),
            stratify_by=y if settings.stratify else None,
        )
        X_tr, y_tr = design.values[split.train], y[split.train]
        X_te, y_te = design.values[split.test], y[split.test]
        cv = cross_validate_lambda(
            X_tr,
            y_tr,
            n_lambda=settings.n_lambda,
            lambda_min_ratio=settings.lambda_min_ratio,
            folds=settings.cv_folds,
            seed=derive_seed(seed, "cv"),
            rule=settings.lambda_rule,
        )
        path = fit_lasso_path(X_tr, y_tr, lambdas=cv.lambdas, columns=design.columns)
        fit = path.fits[cv.selected_index]
        if settings.threshold == "youden":
            threshold = youden_threshold(predict_proba(fit, X_tr), y_tr)
        else:
            threshold = float(settings.threshold)
        prob = predict_proba(fit, X_te)
        curve = roc_curve(prob, y_te)
        cm = confusion_at_threshold(prob, y_te, threshold)
        result.n_train, result.n_test = len(y_tr), len(y_te)
        result.lam = cv.selected_lambda
        result.auc = auc_trapezoid(curve)
        result.tpr, result.tnr = tpr(cm), tnr(cm)
        result.threshold = threshold
        result.fit, result.cv, result.roc = fit, cv, curve
        if not fit.converged:
            result.note = "selected fit did not converge"
    except (DegenerateSplit, NoVariance, SingleClass, UndefinedRate, ValueError) as err:
        result.status = "absent"
        result.note = f"{type(err).__name__}: {err}"
        log.warning("model %s skipped: %s", model_id, result.note)
    return result


def _canonical_labels(labels: np.ndarray, K: int) -> np.ndarray:
    """Renumber clusters by decreasing size (ties by original index)."""
    sizes = np.bincount(labels, minlength=K)
    order = np.lexsort((np.arange(K), -sizes))
    remap = np.empty(K, dtype=int)
    remap[order] = np.arange(K)
    return remap[labels]


def cluster_stage(cohort: Cohort, settings: PipelineSettings, master_seed: int) -> dict:
    """Standardize the clustering variables, project on principal components, pick K and cluster."""
    with stage("impute"):
        imputed = impute_mother_age_global(cohort)
    with stage("encode"):
        design = encode_design_matrix(imputed)
    with stage("standardize"):
        std = fit_standardizer(design, CLUSTERING_VARIABLES)
        z = apply_standardizer(std, design).select(CLUSTERING_VARIABLES)
    with stage("pca"):
        pca = fit_pca(z, std)
        n_comp = settings.components if settings.components is not None else pca.n_selected
        if n_comp == 0:
            raise NoComponents("no eigenvalue exceeds 1; nothing to cluster on")
        scores = project(pca, z, n_comp)
    with stage("elbow"):
        kmax = min(settings.kmax, len(cohort))
        curve = elbow_scan(scores, kmax, settings.kmeans_restarts, derive_seed(master_seed, "elbow"), settings.kmeans_max_iter)
        suggested = suggest_k(curve)
        K = settings.k if settings.k is not None else suggested
    with stage("kmeans"):
        km = kmeans_fit(scores, K, settings.kmeans_restarts, settings.kmeans_max_iter, derive_seed(master_seed, "kmeans"))
        labels = _canonical_labels(km.assignment, K)
    return dict(imputed=imputed, design=design, pca=pca, n_components=n_comp, scores=scores,
                elbow=curve, suggested_k=suggested, K=K, kmeans=km, labels=labels)


def run_cluster_experiment(cohort: Cohort, settings: PipelineSettings, master_seed: int = 0) -> ExperimentReport:
    """Whole-cohort model plus one model per K-Means cluster."""
    cl = cluster_stage(cohort, settings, master_seed)
    y = outcome_vector(cohort)
    labels = cl["labels"]
    with stage("impute_clusterwise"):
        design_c = encode_design_matrix(impute_mother_age_clusterwise(cohort, labels))
    rows = []
    with stage("model:entire"):
        rows.append(train_and_evaluate(cl["design"], y, settings, derive_seed(master_seed, "model", "entire"), "entire", "Entire population"))
    for c in range(cl["K"]):
        model_id = f"cluster_{c + 1}"
        idx = np.nonzero(labels == c)[0]
        with stage(f"model:{model_id}"):
            rows.append(train_and_evaluate(design_c.take(idx), y[idx], settings,
                                           derive_seed(master_seed, "model", model_id), model_id, f"Cluster {c + 1}"))
    sizes = np.bincount(labels, minlength=cl["K"])
    provenance = {
        "experiment": "cluster",
        "master_seed": int(master_seed),
        "n_records": len(cohort),
        "components_selected": int(cl["pca"].n_selected),
        "components_used": int(cl["n_components"]),
        "eigenvalues": [float(v) for v in cl["pca"].eigenvalues],
        "k_suggested": int(cl["suggested_k"]),
        "k_chosen": int(cl["K"]),
        "cluster_sizes": [int(s) for s in sizes],
    }
    km = cl["kmeans"]
    return ExperimentReport("cluster", rows, provenance, cl["elbow"], km, cl["pca"], cl["scores"])


def run_age_group_experiment(cohort: Cohort, settings: PipelineSettings, master_seed: int = 0) -> ExperimentReport:
    """One model per (inclusive) age band; empty bands are reported as absent rows."""
    with stage("impute"):
        imputed = impute_mother_age_global(cohort)
    with stage("encode"):
        design = encode_design_matrix(imputed)
    y = outcome_vector(cohort)
    ages = np.asarray(cohort.column("child_age"))
    rows = []
    for model_id, label, lo, hi in AGE_GROUPS:
        idx = np.nonzero((ages >= lo) & (ages <= hi))[0]
        if idx.size == 0:
            err = EmptyGroup(f"no records aged {lo}-{hi}")
            rows.append(ModelResult(model_id, label, status="absent", note=f"EmptyGroup: {err}"))
            continue
        # a band holding every record is the whole-population model and shares its seed
        seed_key = "entire" if idx.size == len(cohort) else model_id
        with stage(f"model:{model_id}"):
            rows.append(train_and_evaluate(design.take(idx), y[idx], settings,
                                           derive_seed(master_seed, "model", seed_key), model_id, label))
    provenance = {"experiment": "agegroup", "master_seed": int(master_seed), "n_records": len(cohort)}
    return ExperimentReport("agegroup", rows, provenance)


# ---------------------------------------------------------------- reports

METRIC_FIELDS = ("model_id", "label", "status", "n_train", "n_test", "lambda", "auc", "tpr", "tnr", "threshold", "note")
_ARTIFACT = re.compile(r"^(metrics\.csv|elbow\.csv|cluster_assignments\.csv|pca\.csv|manifest\.json|"
                       r"(roc|coefficients|cv)_.+\.csv|(elbow|roc|clusters)\.png)$")


def _num(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (float, np.floating)):
        return "" if np.isnan(x) else repr(float(x))
    return str(x)


def _write_csv(path: Path, header, rows) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_num(v) for v in row])


def file_digest(path: str | Path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def prepare_out_dir(out_dir: Path, force: bool) -> None:
    if out_dir.exists():
        if not out_dir.is_dir():
            raise IoFailure(f"{out_dir} exists and is not a directory")
        existing = list(out_dir.iterdir())
        if existing and not force:
            raise IoFailure(f"{out_dir} already holds a previous run; pass --force to overwrite")
        for p in existing:
            if p.is_file() and _ARTIFACT.match(p.name):
                p.unlink()
    else:
        try:
            out_dir.mkdir(parents=True)
        except OSError as err:
            raise IoFailure(f"cannot create {out_dir}: {err}") from None


def write_reports(report: ExperimentReport, out_dir: str | Path, manifest_extra: dict | None = None,
                  force: bool = False) -> list[Path]:
    """Write delimited results, figures and a run manifest; returns the files written."""
    out_dir = Path(out_dir)
    prepare_out_dir(out_dir, force)
    written: list[Path] = []
    try:
        p = out_dir / "metrics.csv"
        _write_csv(p, METRIC_FIELDS, [
            (r.model_id, r.label, r.status, r.n_train if r.status == "ok" else "", r.n_test if r.status == "ok" else "",
             r.lam, r.auc, r.tpr, r.tnr, r.threshold, r.note) for r in report.rows])
        written.append(p)
        curves = {}
        for r in report.rows:
            if r.status != "ok":
                continue
            p = out_dir / f"roc_{r.model_id}.csv"
            _write_csv(p, ("threshold", "fpr", "tpr"), zip(r.roc.thresholds, r.roc.fpr, r.roc.tpr))
            written.append(p)
            p = out_dir / f"coefficients_{r.model_id}.csv"
            _write_csv(p, ("predictor_name", "coefficient"),
                       [("(intercept)", r.fit.intercept)] + list(zip(r.columns, r.fit.coefficients)))
            written.append(p)
            p = out_dir / f"cv_{r.model_id}.csv"
            sel = r.cv.selected_index
            _write_csv(p, ("lambda", "mean_deviance", "se_deviance", "selected"),
                       [(lam, m, s, int(i == sel)) for i, (lam, m, s) in
                        enumerate(zip(r.cv.lambdas, r.cv.mean_deviance, r.cv.se_deviance))])
            written.append(p)
            curves[r.label] = (r.roc.fpr, r.roc.tpr, r.auc)
        if curves:
            p = out_dir / "roc.png"
            title = "ROC curves by age group" if report.kind == "agegroup" else "ROC curves by model"
            plotting.plot_roc(curves, p, title)
            written.append(p)
        if report.elbow is not None:
            p = out_dir / "elbow.csv"
            _write_csv(p, ("K", "wcss"), report.elbow)
            written.append(p)
            p = out_dir / "elbow.png"
            plotting.plot_elbow(report.elbow.ks, report.elbow.wcss, p, report.provenance.get("k_chosen"))
            written.append(p)
        if report.kmeans is not None:
            labels = _canonical_labels(report.kmeans.assignment, report.kmeans.K)
            p = out_dir / "cluster_assignments.csv"
            _write_csv(p, ("record_index", "cluster"), ((i, c + 1) for i, c in enumerate(labels)))
            written.append(p)
            p = out_dir / "clusters.png"
            plotting.plot_clusters(report.scores, labels, p)
            written.append(p)
        if report.pca is not None:
            p = out_dir / "pca.csv"
            pca = report.pca
            header = ["component", "eigenvalue"] + list(pca.columns)
            _write_csv(p, header, [(f"PC{i + 1}", pca.eigenvalues[i], *pca.loadings[:, i]) for i in range(pca.p)])
            written.append(p)
        manifest = dict(report.provenance)
        manifest.update(manifest_extra or {})
        manifest["models"] = [r.model_id for r in report.rows]
        manifest["files"] = {q.name: file_digest(q) for q in sorted(written, key=lambda q: q.name)}
        p = out_dir / "manifest.json"
        p.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        written.append(p)
    except OSError as err:
        raise IoFailure(f"writing reports to {out_dir} failed: {err}") from None
    return written
