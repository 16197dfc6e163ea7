import json

import numpy as np
import pytest

from conftest import coarse_incidence
from scatterlm.forward import ForwardModel, simulate_signature
from scatterlm.lm_solver import LmConfig
from scatterlm.pipeline import (
    BenchReport,
    BundleMismatchError,
    ClassifierBundle,
    ParameterSpace,
    ParamSpec,
    SimulationCache,
    SimulationError,
    SvmConfig,
    SweepGrid,
    generate_training_sets,
    kernel_sweep,
    map_jobs,
    map_to_subranges,
    reconstruct,
    run_benchmark,
    train_classifiers,
)
from scatterlm.pipeline.bench import case_seed
from scatterlm.signature import ErrorSpec
from scatterlm.svm import KernelSpec

RBF1 = KernelSpec("rbf", 1.0)


# --- parameter space ------------------------------------------------------------


def test_quartering():
    p = ParamSpec("TCD", 250, 550, 4)
    assert p.subranges() == [(250.0, 325.0), (325.0, 400.0), (400.0, 475.0), (475.0, 550.0)]
    assert [p.subrange_median(j) for j in range(4)] == [287.5, 362.5, 437.5, 512.5]


def test_subranges_partition_exactly():
    p = ParamSpec("X", 1.0, 19.0, 7)
    s = p.subranges()
    assert s[0][0] == 1.0 and s[-1][1] == 19.0
    assert all(a[1] == b[0] for a, b in zip(s, s[1:]))
    assert all(b - a == pytest.approx(18 / 7) for a, b in s)


def test_subrange_index_edges():
    p = ParamSpec("TCD", 250, 550, 4)
    assert p.subrange_index(250.0) == 0
    assert p.subrange_index(325.0) == 1
    assert p.subrange_index(549.99) == 3
    assert p.subrange_index(550.0) == 3
    with pytest.raises(ValueError):
        p.subrange_index(551.0)


@pytest.mark.parametrize("kw", [dict(low=5, high=5), dict(n_subranges=1), dict(samples_per_subrange=0)])
def test_param_spec_rejects(kw):
    args = dict(name="X", low=0.0, high=1.0)
    args.update(kw)
    with pytest.raises(ValueError):
        ParamSpec(**args)


def si_space(design="cross_product", K=15, N=4):
    return ParameterSpace(tuple(ParamSpec(n, lo, hi, N, K, K) for n, lo, hi in
                                (("TCD", 250, 550), ("Hgt", 300, 600), ("BCD", 250, 550))), design)


def test_pair_count_full_scale():
    assert si_space().pairs_per_class(0) == 3375


@pytest.mark.parametrize("design", ["cross_product", "independent"])
def test_class_points_inside_subrange(design):
    sp = si_space(design, K=3)
    pts = sp.class_points(1, 2, seed=7)
    assert pts.shape == (27, 3)
    assert np.all((pts[:, 1] >= 450) & (pts[:, 1] <= 525))
    assert np.all((pts[:, 0] >= 250) & (pts[:, 0] <= 550))
    assert np.array_equal(pts, sp.class_points(1, 2, seed=7))
    assert not np.array_equal(pts, sp.class_points(1, 2, seed=8))


def test_cross_product_shares_values():
    pts = si_space("cross_product", K=3).class_points(0, 0, seed=1)
    assert all(np.unique(pts[:, c]).size == 3 for c in range(3))


def test_independent_prefix_property():
    small = si_space("independent", K=2).with_samples(samples_full_range=3)
    large = small.with_samples(samples_per_subrange=4)
    a, b = small.class_points(0, 1, 5), large.class_points(0, 1, 5)
    assert np.array_equal(a, b[: len(a)])


def test_space_roundtrip_and_structure_check(si_grating):
    sp = si_space("independent", K=5)
    assert ParameterSpace.from_dict(sp.to_dict()) == sp
    sp.check_structure(si_grating.parameters)
    with pytest.raises(ValueError):
        sp.check_structure(["TCD", "BCD", "Hgt"])


def test_case_seed_is_stable():
    assert case_seed(3, 0) == case_seed(3, 0)
    assert case_seed(3, 0) != case_seed(3, 1)


# --- workers ------------------------------------------------------------------------


def test_map_jobs_order():
    assert map_jobs(abs, [-3, 2, -1], workers=1) == [3, 2, 1]


def test_simulation_error_names_parameters(tiny_grating):
    cache = SimulationCache(ForwardModel(tiny_grating, coarse_incidence()))
    with pytest.raises(SimulationError) as info:
        cache.mueller(np.array([[900.0, 100.0, 300.0]]), ["TCD", "Hgt", "BCD"], [200.0])
    assert info.value.params == {"TCD": 900.0, "Hgt": 100.0, "BCD": 300.0}


def test_cache_reuses_simulations(tiny_grating):
    cache = SimulationCache(ForwardModel(tiny_grating, coarse_incidence()))
    pts = np.array([[300.0, 400.0, 350.0], [320.0, 410.0, 360.0]])
    a = cache.mueller(pts, ["TCD", "Hgt", "BCD"], [200.0, 500.0])
    n = cache.n_simulated
    b = cache.mueller(pts[::-1], ["TCD", "Hgt", "BCD"], [200.0, 500.0])
    assert cache.n_simulated == n
    assert np.array_equal(a, b[::-1])


# --- tiny end-to-end ------------------------------------------------------------------


TINY_SPACE = ParameterSpace(tuple(ParamSpec(n, lo, hi, 2, 3, 3) for n, lo, hi in
                                  (("TCD", 250, 550), ("Hgt", 300, 600), ("BCD", 250, 550))), "independent")


@pytest.fixture(scope="module")
def tiny():
    from scatterlm.forward import Layer, StructureModel
    s = StructureModel(
        pitch=800.0, ambient="Air", substrate="Si",
        layers=(Layer("trapezoid", "Hgt", "Si", "Air", top_width="TCD", bottom_width="BCD"),),
        parameters=("TCD", "Hgt", "BCD"), name="tiny", n_slices=4, truncation_order=2,
    )
    inc = coarse_incidence()
    sets = {}
    bundle = train_classifiers(TINY_SPACE, s, inc, RBF1, 4, SvmConfig(), seed=3, training_sets=sets)
    return s, inc, bundle, sets


def test_training_sets(tiny):
    s, inc, bundle, sets = tiny
    ts = sets["Hgt"]
    assert len(ts) == 2 * 27 and ts.n_features == 15 * 4
    assert ts.meta["parameter"] == "Hgt" and ts.meta["k"] == 4
    assert ts.meta["subranges"] == [[300.0, 450.0], [450.0, 600.0]]
    again = generate_training_sets(TINY_SPACE, 1, s, inc, 4, 3)
    assert again == ts


def test_bundle_shape_and_self_accuracy(tiny):
    s, inc, bundle, sets = tiny
    assert list(bundle.models) == ["TCD", "Hgt", "BCD"]
    assert bundle.wavelengths.tolist() == [200.0, 400.0, 600.0, 800.0]
    for name, ts in sets.items():
        m = bundle.models[name]
        assert len(m.binary_models) == 1
        assert np.mean(m.predict(ts.X) == ts.labels) >= 0.95


def test_bundle_save_load(tiny, tmp_path):
    s, inc, bundle, sets = tiny
    files = bundle.save(tmp_path / "b")
    assert sorted(f.name for f in files) == ["BCD.model.json", "Hgt.model.json", "TCD.model.json", "bundle.json"]
    back = ClassifierBundle.load(tmp_path / "b")
    assert back.structure_hash == bundle.structure_hash and back.space == bundle.space
    for name in bundle.models:
        assert np.array_equal(back.models[name].predict(sets[name].X), bundle.models[name].predict(sets[name].X))
    meta = json.loads((tmp_path / "b" / "bundle.json").read_text())
    assert meta["format_version"] == 1


def test_bundle_rejects_other_structure(tiny, si_grating):
    s, inc, bundle, sets = tiny
    with pytest.raises(BundleMismatchError):
        bundle.check_structure(si_grating)


def test_mapping_and_median(tiny):
    s, inc, bundle, sets = tiny
    sig = simulate_signature(s, {"TCD": 300.0, "Hgt": 520.0, "BCD": 500.0}, inc)
    m = map_to_subranges(bundle, sig)
    for mm in m:
        assert mm.median == (mm.subrange[0] + mm.subrange[1]) / 2
    assert [mm.label for mm in m] == [0, 1, 1]


def test_mapping_needs_bundle_wavelengths(tiny):
    s, inc, bundle, sets = tiny
    sig = simulate_signature(s, {"TCD": 300.0, "Hgt": 520.0, "BCD": 500.0}, inc.with_wavelengths([200.0, 300.0]))
    with pytest.raises(BundleMismatchError):
        map_to_subranges(bundle, sig)


def test_reconstruct_clean(tiny):
    s, inc, bundle, sets = tiny
    truth = {"TCD": 310.0, "Hgt": 480.0, "BCD": 470.0}
    rec = reconstruct(simulate_signature(s, truth, inc), s, TINY_SPACE, bundle, inc)
    assert rec.fit.converged
    for n, v in truth.items():
        assert abs(rec.fit.params[n] - v) < 0.5
    assert rec.init == {m.name: m.median for m in rec.mapping}


def test_benchmark_empty(tiny):
    s, inc, bundle, sets = tiny
    rep = run_benchmark(TINY_SPACE, s, inc, bundle, 0, ErrorSpec())
    assert rep.records == [] and rep.aggregates() == {"n_cases": 0}


def test_benchmark_needs_bundle(tiny):
    s, inc, bundle, sets = tiny
    with pytest.raises(ValueError):
        run_benchmark(TINY_SPACE, s, inc, None, 1, ErrorSpec())


@pytest.fixture(scope="module")
def small_report(tiny):
    s, inc, bundle, sets = tiny
    return run_benchmark(TINY_SPACE, s, inc, bundle, 3, ErrorSpec(0.02, 0.02, 1), seed=5,
                         lm_config=LmConfig(max_iterations=30))


def test_benchmark_records(small_report):
    assert [(r.case, r.method) for r in small_report.records] == [
        (c, m) for c in range(3) for m in ("svm_lm", "lm_only")]
    by_case = {}
    for r in small_report.records:
        by_case.setdefault(r.case, []).append(r)
        for n in small_report.names:
            assert r.abs_errors[n] == abs(r.extracted[n] - r.true[n])
    for recs in by_case.values():
        assert recs[0].true == recs[1].true
        assert recs[1].init == TINY_SPACE.medians


def test_benchmark_aggregates_recomputed(small_report):
    agg = small_report.aggregates()
    svm = small_report.by_method("svm_lm")
    assert agg["svm_lm"]["converged"] == sum(r.converged for r in svm)
    assert agg["svm_lm"]["median_abs_error"]["TCD"] == float(np.median([r.abs_errors["TCD"] for r in svm]))
    trimmed = BenchReport(small_report.names, small_report.records[:2], small_report.meta)
    assert trimmed.aggregates()["n_cases"] == 1


def test_benchmark_is_deterministic(tiny, small_report):
    s, inc, bundle, sets = tiny
    again = run_benchmark(TINY_SPACE, s, inc, bundle, 3, ErrorSpec(0.02, 0.02, 1), seed=5,
                          lm_config=LmConfig(max_iterations=30))
    for a, b in zip(small_report.records, again.records):
        assert a.extracted == b.extracted and a.iterations == b.iterations


def test_benchmark_files(small_report, tmp_path):
    tsv, summary = small_report.write(tmp_path, "demo")
    lines = tsv.read_text().splitlines()
    assert len(lines) == 1 + 6
    assert lines[0].split("\t")[:3] == ["case", "method", "true_TCD"]
    assert json.loads(summary.read_text())["aggregates"]["n_cases"] == 3


def test_failed_fit_is_recorded(tiny):
    s, inc, bundle, sets = tiny
    rep = run_benchmark(TINY_SPACE, s, inc, bundle, 1, ErrorSpec(), methods=["lm_only"],
                        lm_config=LmConfig(max_iterations=1))
    (r,) = rep.records
    assert not r.converged and rep.diverged(r)
    assert r.message == "iteration limit reached"


def test_kernel_sweep_rows(tiny):
    s, inc, bundle, sets = tiny
    grid = SweepGrid((RBF1, KernelSpec("polynomial", 2)), (4,), (2, 3), ((0.0, 0.0), (0.05, 0.0)), (0, 1))
    table = kernel_sweep(TINY_SPACE, s, inc, grid, param_index=0, n_test=10, training_seed=3)
    assert len(table.rows) == grid.n_cells
    assert {r.pairs_per_class for r in table.rows} == {18, 27}
    full = table.select(kernel="rbf", pairs_per_class=27, random_magnitude=0.0)
    assert all(0 <= r.accuracy <= 1 for r in full)
    assert table.mean_accuracy(kernel="rbf") == pytest.approx(np.mean([r.accuracy for r in table.select(kernel="rbf")]))
    with pytest.raises(ValueError):
        table.mean_accuracy(kernel="sigmoid")
