import random

import numpy as np
import pandas as pd
import pytest

from curriculum_hardship.empirical import (
    COMPONENTS,
    blocking_factor,
    blocking_score,
    dropout_after_fail,
    eventual_pass,
    first_try_pass,
    last_spells,
    mean_attempts_to_pass,
)
from curriculum_hardship.errors import StandardizationError

from conftest import ev, tables_for
from oracles import sample_z


def attempts_frame(first_outcomes):
    return pd.DataFrame(
        {"student_id": [f"s{k}" for k in range(len(first_outcomes))], "attempt_index": 1, "outcome": first_outcomes}
    )


def test_first_try_pass():
    assert first_try_pass(attempts_frame(["pass"] * 4 + ["fail"] * 6)) == 0.4
    assert first_try_pass(attempts_frame(["pass"] * 5)) == 1.0
    assert first_try_pass(attempts_frame(["pass", "withdrawal", "absent", "withdrawal"])) == 0.25


def test_eventual_pass_and_complement():
    out = pd.DataFrame({"passed": [True] * 7 + [False] * 3})
    assert eventual_pass(out) == pytest.approx(0.7)
    assert eventual_pass(pd.DataFrame({"passed": [False] * 4})) == 0.0
    assert eventual_pass(out) == pytest.approx(1 - (~out["passed"]).sum() / len(out))


def test_mean_attempts_to_pass():
    out = pd.DataFrame({"passed": [True, True, True, True, False], "n_attempts": [1, 1, 2, 4, 9]})
    assert mean_attempts_to_pass(out) == 2.0
    assert mean_attempts_to_pass(pd.DataFrame({"passed": [True] * 3, "n_attempts": [1] * 3})) == 1.0
    assert mean_attempts_to_pass(pd.DataFrame({"passed": [False], "n_attempts": [3]})) is None


def _dropout_fixture(rng):
    """30 students on courses X and Y; returns rows and hand labels for course X."""
    rows, labels = [], {}
    for k in range(30):
        s = f"s{k:02d}"
        kind = rng.choice(["stall_x", "stall_x_then_y", "pass_x", "graduate_after_fail", "recent_stall"])
        if kind == "stall_x":
            rows += [ev(s, "Y", "regular_exam", "pass", 2000), ev(s, "X", "regular_exam", "fail", 2001)]
        elif kind == "stall_x_then_y":
            rows += [ev(s, "X", "regular_exam", "fail", 2000), ev(s, "Y", "regular_exam", "pass", 2001)]
        elif kind == "pass_x":
            rows += [ev(s, "X", "regular_exam", "fail", 2000), ev(s, "X", "regular_exam", "pass", 2001)]
        elif kind == "graduate_after_fail":
            rows += [ev(s, "X", "regular_exam", "fail", 2000), ev(s, None, "graduation", "not_applicable", 2000, term=2)]
        else:
            rows += [ev(s, "X", "regular_exam", "absent", 2009)]
        labels[s] = kind
    rows.append(ev("zz", "Y", "regular_exam", "pass", 2010))
    return rows, labels


def test_dropout_after_fail_matches_hand_labels():
    rows, labels = _dropout_fixture(random.Random(3))
    seg, _, att, out, _ = tables_for(rows)
    last = last_spells(seg.spells)
    ox, ax = out[out["course_code"] == "X"], att[att["course_code"] == "X"]
    counted = sum(1 for v in labels.values() if v == "stall_x")
    attempters = sum(1 for v in labels.values() if v != "recent_stall")
    assert dropout_after_fail(ox, ax, last) == pytest.approx(counted / attempters)
    population = int((last["end_reason"] != "censored").sum())
    rate = dropout_after_fail(ox, ax, last, "spell_population", population)
    assert rate == pytest.approx(counted / population)


def test_blocking_factor_examples():
    courses = ["J", "K1", "K2", "K3"]
    n = 8
    first = np.full((n, 4), np.nan)
    passed = np.full((n, 4), np.nan)
    passed[:, 0] = 2001
    first[:, 0] = 2001
    first[:, 1] = 2002  # all after
    first[:4, 2] = 2002  # half after
    first[4:, 2] = 2001  # same period is not gated
    first[:2, 3] = 2003  # a quarter after
    assert blocking_factor("J", {"K1", "K2", "K3"}, courses, first, passed) == pytest.approx(1.75)
    assert blocking_factor("J", {"K1"}, courses, first, passed) == 1.0
    assert blocking_factor("K1", set(), courses, first, passed) == 0.0
    # no passers of the course gives nothing to gate
    assert blocking_factor("K1", {"K2"}, courses, first, passed) == 0.0


def measures(n, rng, units=(("D", "C"),)):
    rows = []
    for k in range(n):
        p_ever = rng.uniform(0.3, 1.0)
        rows.append(
            {
                "degree_id": units[k % len(units)][0],
                "curriculum_id": units[k % len(units)][1],
                "course_code": f"K{k:02d}",
                "n_attempters": 50,
                "n_passers": 40,
                "n_equivalence_passes": 0,
                "n_successors": 2,
                "p_first": p_ever * rng.uniform(0.3, 1.0),
                "p_ever": p_ever,
                "mean_attempts": rng.uniform(1.0, 3.0),
                "dropout_after_fail": rng.uniform(0.0, 0.3),
                "blocking_factor": rng.uniform(0.0, 4.0),
            }
        )
    return pd.DataFrame(rows)


def test_blocking_score_matches_manual_z_sum():
    m = measures(20, random.Random(1))
    got = blocking_score(m).set_index("course_code")["blocking_score"]
    cols = {
        "fail_first": (1 - m["p_first"]).tolist(),
        "fail_ever": (1 - m["p_ever"]).tolist(),
        "mean_attempts": m["mean_attempts"].tolist(),
        "dropout_after_fail": m["dropout_after_fail"].tolist(),
        "blocking_factor": m["blocking_factor"].tolist(),
    }
    zs = {k: sample_z(v) for k, v in cols.items()}
    for idx, code in enumerate(m["course_code"]):
        assert got[code] == pytest.approx(sum(zs[c][idx] for c in COMPONENTS), abs=1e-12)


def test_two_course_pool_is_mirrored():
    m = measures(2, random.Random(2))
    s = blocking_score(m)["blocking_score"].to_numpy()
    assert s[0] == pytest.approx(-s[1])


def test_course_at_pooled_mean_scores_zero():
    m = measures(3, random.Random(4))
    for col in ("p_first", "p_ever", "mean_attempts", "dropout_after_fail", "blocking_factor"):
        a, c = m[col].iat[0], m[col].iat[2]
        m.loc[1, col] = (a + c) / 2
    assert blocking_score(m)["blocking_score"].iat[1] == pytest.approx(0.0, abs=1e-12)


def test_missing_mean_attempts_takes_pooled_maximum():
    m = measures(5, random.Random(5))
    m.loc[2, "mean_attempts"] = None
    out = blocking_score(m)
    assert out["mean_attempts_imputed"].tolist() == [False, False, True, False, False]
    assert out["mean_attempts"].iat[2] == m["mean_attempts"].max()


def test_constant_component_contributes_nothing():
    m = measures(6, random.Random(6))
    m["dropout_after_fail"] = 0.1
    assert (blocking_score(m)["z_dropout_after_fail"] == 0.0).all()


def test_pool_too_small():
    with pytest.raises(StandardizationError):
        blocking_score(measures(1, random.Random(0)))


@pytest.mark.parametrize("column", ["mean_attempts", "blocking_factor", "dropout_after_fail"])
def test_affine_rescaling_invariance(column):
    m = measures(25, random.Random(7))
    base = blocking_score(m)["blocking_score"].to_numpy()
    scaled = m.copy()
    scaled[column] = scaled[column] * 10 + 3
    assert np.allclose(blocking_score(scaled)["blocking_score"].to_numpy(), base, atol=1e-12)
