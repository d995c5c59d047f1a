import math
import warnings

import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import brute_force_pairs, log_relaxation
from pdolearn.compression import (
    REGIONS,
    CompressionParams,
    ParameterError,
    SupportMask,
    admissible_sigma_window,
    build_mask,
    build_mask_new,
    check_inclusion,
    check_sigma,
    classify_region,
    empty_mask,
    full_mask,
    region_nnz,
    region_predicates,
    region_table,
    slopes_hold,
    sparsity_stats,
    tau,
    tau_exponent,
)
from pdolearn.wavelets import index_count


def as_set(mask):
    rows, cols = mask.pairs()
    return set(zip(rows.tolist(), cols.tolist()))


def test_default_mask_frozen_counts():
    p = CompressionParams(J=5)
    mask = build_mask(p)
    assert mask.nnz == 808
    table = {name: (nnz, mr, mc) for name, nnz, mr, mc in region_table(mask, p)}
    assert table["D5"][0] == 800 and table["D6"][0] == 8
    assert table["D1"][0] == table["D2"][0] == 0
    assert table["all"] == (808, 15, 15)


def test_tau_formula_examples():
    p = CompressionParams(J=4, t=1, tp=1, r=-2, dt=4, a=2)
    # exponent = (4*4 - 2*1 - 3*1 - 5*4) / 6
    assert tau_exponent(2, 3, p) == pytest.approx(-9 / 6)
    assert tau(2, 3, p) == pytest.approx(2 * max(2.0**-2, 2.0**-1.5))
    assert tau(0, 0, p) == pytest.approx(2 * 2.0 ** (16 / 6))
    with pytest.raises(ParameterError):
        tau_exponent(0, 0, CompressionParams(J=3, dt=1, r=-2))


@given(
    t=st.floats(-0.5, 1.5),
    tp=st.floats(-0.5, 1.5),
    sigma=st.floats(2.0, 6.0),
    a=st.floats(1.0, 3.0),
    r=st.sampled_from([-2.0, -1.0, 0.0]),
)
def test_mask_matches_pairwise_definition(t, tp, sigma, a, r):
    J = 4
    if min(t, tp) <= r / 2 or sigma - 0.5 + min(t, tp) - r / 2 <= 0:
        return
    p = CompressionParams(J=J, t=t, tp=tp, r=r, sigma=sigma, a=a)
    assert as_set(build_mask(p)) == brute_force_pairs(J, t, tp, r, sigma, a=a)


@pytest.mark.parametrize("d,dt", [(2, 2), (3, 5)])
def test_other_families_match_pairwise_definition(d, dt):
    p = CompressionParams(J=5, t=0.5, tp=1.0, r=-1.0, sigma=3.0, d=d, dt=dt)
    assert as_set(build_mask(p)) == brute_force_pairs(5, 0.5, 1.0, -1.0, 3.0, dt=dt, d=d)


def test_enlarged_mask_matches_relaxed_definition():
    p = CompressionParams(J=5, t=1, tp=1, r=-2, sigma=2.25)
    extra = log_relaxation(5, 0.25)
    assert as_set(build_mask_new(p, 0.25)) == brute_force_pairs(5, 1, 1, -2, 2.25, extra=extra)


@pytest.mark.parametrize("J", [3, 5, 6])
def test_enlarged_mask_is_monotone_in_eps(J):
    p = CompressionParams(J=J, t=1, tp=1, r=-2, sigma=2.25)
    base = build_mask(p)
    loose = build_mask_new(p, 0.25)
    looser = build_mask_new(p, 0.1)
    assert check_inclusion(base, loose)
    assert check_inclusion(loose, looser)
    assert looser.nnz >= loose.nnz >= base.nnz


def test_enlarged_mask_rejects_bad_eps():
    p = CompressionParams(J=4)
    with pytest.raises(ParameterError):
        build_mask_new(p, 0.0)
    with pytest.raises(ParameterError):
        build_mask_new(p, 2.0)


def test_inclusion_in_larger_level():
    small = build_mask(CompressionParams(J=4, t=0.5, tp=0.5, sigma=3.0))
    big = build_mask(CompressionParams(J=6, t=1.0, tp=1.0, sigma=3.0))
    assert check_inclusion(small, big)
    assert not check_inclusion(big.restrict(4), empty_mask(4))
    with pytest.raises(ValueError):
        check_inclusion(big, small)


def test_regions_partition_every_block():
    p = CompressionParams(J=7, t=0.5, tp=1.0, r=-1, sigma=3.0)
    for j in range(8):
        for jp in range(8):
            preds = region_predicates(j, jp, p)
            assert any(preds.values())
            name = classify_region(j, jp, p)
            # D1/D2 are exactly the blocks the slope conditions discard
            assert (name in ("D1", "D2")) == (not slopes_hold(j, jp, p))


def test_region_counts_add_up():
    p = CompressionParams(J=6, t=1, tp=1, r=-2, sigma=2.25)
    mask = build_mask(p)
    counts = region_nnz(mask, p)
    assert sum(counts.values()) == mask.nnz
    assert counts["D1"] == counts["D2"] == 0
    table = region_table(mask, p)
    assert [row[0] for row in table] == [*REGIONS, "all"]
    assert [row[1] for row in table[:-1]] == [counts[r] for r in REGIONS]


def test_sparsity_stats_consistent():
    mask = build_mask(CompressionParams(J=6))
    stats = sparsity_stats(mask)
    assert stats.perBlockNnz.sum() == mask.nnz
    dense = mask.dense_indicator()
    assert stats.maxRowNnz == dense.sum(axis=1).max()
    assert stats.maxColNnz == dense.sum(axis=0).max()


def test_construction_does_not_scan_all_pairs():
    mask = build_mask(CompressionParams(J=10))
    assert mask.evaluations < 0.1 * index_count(10) ** 2


def test_mask_file_roundtrip(tmp_path):
    p = CompressionParams(J=4, t=0.5, tp=1.0, r=-1.0, sigma=3.0)
    mask = build_mask(p)
    mask.save(tmp_path / "m.txt")
    back = SupportMask.load(tmp_path / "m.txt")
    assert back == mask
    assert back.params == p


def test_mask_file_rejects_duplicates(tmp_path):
    (tmp_path / "m.txt").write_text("# J=0\n0:0,0\n1:1\n")
    with pytest.raises(ValueError):
        SupportMask.load(tmp_path / "m.txt")


def test_full_and_empty_masks():
    assert full_mask(3).nnz == 256
    assert empty_mask(3).nnz == 0
    assert full_mask(3).contains(15, 0) and not empty_mask(3).contains(0, 0)
    assert full_mask(4).restrict(2) == full_mask(2)


def test_sigma_window_warnings():
    p = CompressionParams(J=4, t=0, tp=0, r=-2, sigma=10)
    lower, upper = admissible_sigma_window(p)
    assert max(lower.values()) == pytest.approx(1.5)
    with pytest.warns(UserWarning, match="sigma"):
        assert check_sigma(p)
    ok = CompressionParams(J=4, t=1, tp=1, r=1, sigma=1.2, d=3, dt=5)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert check_sigma(ok) == []


def test_slope_parameter_validation():
    with pytest.raises(ParameterError):
        slopes_hold(1, 1, CompressionParams(J=3, t=-1, tp=-1, r=0, sigma=0.5))


def test_log_relaxation_value():
    assert log_relaxation(4, 0.25) == pytest.approx(math.log2(16))
