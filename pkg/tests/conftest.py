from __future__ import annotations

import dataclasses

import pytest

from riskcluster.schema import NotificationRecord

# criterion id -> (description, outcome); filled in as acceptance tests report
_CRITERIA: dict[str, list] = {}


def pytest_collection_modifyitems(items):
    for item in items:
        m = item.get_closest_marker("criterion")
        if m is not None:
            cid, text = m.args
            _CRITERIA.setdefault(cid, [text, None])


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    m = item.get_closest_marker("criterion")
    if m is None:
        return
    entry = _CRITERIA[m.args[0]]
    failed = rep.failed or (rep.when == "call" and rep.skipped)
    if failed:
        entry[1] = "FAIL"
    elif rep.when == "call" and entry[1] is None:
        entry[1] = "PASS"


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for cid in sorted(_CRITERIA, key=lambda c: int(c.lstrip("AC"))):
        text, result = _CRITERIA[cid]
        tr.write_line(f"{result or 'NOT RUN':7s} {cid}: {text}")


def make_record(**overrides) -> NotificationRecord:
    base = dict(
        child_age=5,
        gender="Female",
        ethnic_group="European",
        prev_risk_safety_flag=0,
        n_prev_notifications=2,
        no_prev_notification_flag=0,
        days_since_last_intake=120,
        no_prev_intake_flag=0,
        n_maltreatment_findings=1,
        no_prev_maltreatment_flag=0,
        prev_custody_flag=0,
        open_phase_flag=1,
        benefit_inclusion_flag=1,
        msd_ot_contact_level=2,
        mother_age=29.5,
        mother_cps_contact_level=3,
        deprivation_index="7",
        n_children_reported=2,
        n_sibling_prev_notifications=1,
        notifier_role="PoliceFVI",
        outcome=1,
    )
    base.update(overrides)
    return NotificationRecord(**base)


@pytest.fixture
def record():
    return make_record()


def vary(rec: NotificationRecord, **changes) -> NotificationRecord:
    return dataclasses.replace(rec, **changes)
