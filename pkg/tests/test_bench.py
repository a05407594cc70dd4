import io

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from linfoot.bench import (
    CorpusConfig,
    GridSpec,
    as_estimator,
    bootstrap_ci,
    draw_target,
    make_training_corpus,
    nearest_rank,
    run_grid,
    write_report,
)
from linfoot.copula import Dataset, param_from_linfoot, sample
from linfoot.errors import ConvergenceError, DomainError, ParameterError
from linfoot.features import read_bundles
from linfoot.neural import build_model1
from linfoot.numerics import RngStream
from reference_tables import FNN_GAUSSIAN


def _report(results):
    buf = io.StringIO()
    write_report(results, buf)
    return buf.getvalue()


def test_grid_spec_validation():
    with pytest.raises(DomainError):
        GridSpec(replications=0)
    with pytest.raises(DomainError):
        GridSpec(linfoot_levels=(0.999,))
    with pytest.raises(DomainError):
        GridSpec(copulas=("independence",))
    with pytest.raises(ValueError):
        GridSpec(copulas=("frank",))


def test_grid_is_deterministic_and_report_is_stable():
    spec = GridSpec(linfoot_levels=(0.0, 0.6), sample_sizes=(100,), replications=6, base_seed=5,
                    methods=("fnn", "pearson"))
    a, b = run_grid(spec), run_grid(spec)
    assert _report(a) == _report(b)
    assert len(a) == 2 * 2 * 1 * 2
    lines = _report(a).splitlines()
    assert lines[0] == "copula,level,n,method,mean,sd,bias,replications,skipped"
    assert len(lines) == 1 + len(a)
    for cell in a:
        assert cell.replications == 6 and cell.skipped == 0
        assert cell.mean == pytest.approx(np.mean(cell.estimates), abs=1e-15)
        assert cell.sd == pytest.approx(np.std(cell.estimates, ddof=1), abs=1e-15)
        assert cell.bias == pytest.approx(cell.mean - cell.level, abs=1e-15)
    other = run_grid(GridSpec(linfoot_levels=(0.0, 0.6), sample_sizes=(100,), replications=6,
                              base_seed=6, methods=("fnn", "pearson")))
    assert _report(other) != _report(a)


def test_growing_replications_keeps_earlier_datasets():
    small = run_grid(GridSpec(copulas=("gaussian",), linfoot_levels=(0.4,), sample_sizes=(100,),
                              replications=3))
    large = run_grid(GridSpec(copulas=("gaussian",), linfoot_levels=(0.4,), sample_sizes=(100,),
                              replications=5))
    assert np.array_equal(small[0].estimates, large[0].estimates[:3])


def test_independence_cell_bias_is_non_negative():
    (cell,) = run_grid(GridSpec(copulas=("gaussian",), linfoot_levels=(0.0,), sample_sizes=(200,),
                                replications=20))
    assert cell.bias >= 0.0


@pytest.fixture(scope="module")
def fnn_gaussian_grid():
    spec = GridSpec(copulas=("gaussian",), linfoot_levels=(0.0, 0.2, 0.4, 0.6, 0.8, 0.99),
                    sample_sizes=(100, 1000), replications=20, base_seed=11)
    return {(c.level, c.n): c for c in run_grid(spec)}


def test_fnn_means_increase_with_level(fnn_gaussian_grid):
    means = [fnn_gaussian_grid[(lvl, 1000)].mean for lvl in (0.0, 0.2, 0.4, 0.6, 0.8, 0.99)]
    assert all(a < b for a, b in zip(means, means[1:]))


def test_fnn_bias_shrinks_with_n(fnn_gaussian_grid):
    for lvl in (0.0, 0.2, 0.4, 0.6, 0.8, 0.99):
        assert abs(fnn_gaussian_grid[(lvl, 1000)].bias) <= abs(fnn_gaussian_grid[(lvl, 100)].bias) + 0.005


def test_fnn_high_dependence_cell():
    (cell,) = run_grid(GridSpec(copulas=("gaussian",), linfoot_levels=(0.8,), sample_sizes=(1000,),
                                replications=60, base_seed=3))
    ref_mean, ref_sd = FNN_GAUSSIAN[(0.8, 1000)]
    assert abs(cell.mean - ref_mean) <= 0.01
    assert 0.008 <= cell.sd <= 0.018
    assert ref_sd == 0.012


def test_custom_estimator_in_grid():
    spec = GridSpec(copulas=("clayton",), linfoot_levels=(0.5,), sample_sizes=(50,), replications=3,
                    methods=("half",))
    (cell,) = run_grid(spec, estimators={"half": lambda d: 0.5})
    assert cell.mean == 0.5 and cell.sd == 0.0 and cell.bias == 0.0


def test_failed_replications_are_counted():
    def flaky(data):
        if data.x[0] > 0:
            raise ParameterError("refuse")
        return 0.1

    spec = GridSpec(copulas=("gaussian",), linfoot_levels=(0.3,), sample_sizes=(30,), replications=12,
                    methods=("flaky",))
    (cell,) = run_grid(spec, estimators={"flaky": flaky})
    assert cell.replications + cell.skipped == 12
    assert 0 < cell.skipped < 12


def test_report_of_empty_cell_writes_nan():
    spec = GridSpec(copulas=("gaussian",), linfoot_levels=(0.3,), sample_sizes=(30,), replications=2,
                    methods=("bad",))

    def bad(data):
        raise ParameterError("never")

    text = _report(run_grid(spec, estimators={"bad": bad}))
    assert text.splitlines()[1].split(",")[4:8] == ["nan", "nan", "nan", "0"]


def test_as_estimator_variants():
    data = sample(param_from_linfoot("gaussian", 0.5), 200, RngStream(0, 1))
    pearson = as_estimator("pearson")(data)
    assert 0.3 < pearson < 0.7
    net = as_estimator(build_model1(0))(data)
    assert 0.0 <= net <= 1.0
    with pytest.raises(TypeError):
        as_estimator(3)


# -- bootstrap -----------------------------------------------------------------


@pytest.mark.parametrize("p, expected", [(0.025, 3.0), (0.5, 50.0), (0.975, 98.0), (1.0, 100.0),
                                         (0.0, 1.0), (0.01, 1.0), (0.011, 2.0)])
def test_nearest_rank_examples(p, expected):
    assert nearest_rank(np.arange(1.0, 101.0), p) == expected


@given(st.lists(st.floats(-10, 10), min_size=1, max_size=60), st.floats(0.0, 1.0))
def test_nearest_rank_definition(values, p):
    s = np.sort(np.asarray(values))
    q = nearest_rank(s, p)
    assert np.mean(s <= q) >= p - 1e-9
    below = s[s < q]
    assert below.size == 0 or np.mean(s <= below.max()) < p + 1e-9


def test_bootstrap_constant_estimator():
    data = sample(param_from_linfoot("gaussian", 0.3), 60, RngStream(1, 1))
    res = bootstrap_ci(data, lambda d: 0.5, B=100)
    assert (res.lower, res.upper, res.estimate) == (0.5, 0.5, 0.5)
    assert res.replicates.size == 100 and res.redraws == 0


def test_bootstrap_interval_contains_replicate_median_and_is_deterministic():
    data = sample(param_from_linfoot("gaussian", 0.6), 300, RngStream(2, 1))
    a = bootstrap_ci(data, "fnn", B=150, seed=4)
    b = bootstrap_ci(data, "fnn", B=150, seed=4)
    assert a.lower <= np.median(a.replicates) <= a.upper
    assert a.lower < a.upper
    assert (a.lower, a.upper) == (b.lower, b.upper)
    assert np.array_equal(a.replicates, np.sort(a.replicates))
    c = bootstrap_ci(data, "fnn", B=150, seed=5)
    assert not np.array_equal(a.replicates, c.replicates)


def test_bootstrap_validation():
    data = Dataset(np.arange(10.0), np.arange(10.0))
    with pytest.raises(DomainError):
        bootstrap_ci(data, "pearson", B=99)
    with pytest.raises(DomainError):
        bootstrap_ci(data, "pearson", B=100, alpha=0.0)


def test_bootstrap_redraws_failed_resamples():
    calls = {"n": 0}

    def sometimes(d):
        calls["n"] += 1
        if calls["n"] % 3 == 0:
            raise ParameterError("no")
        return float(np.mean(d.x))

    data = Dataset(np.arange(20.0), np.arange(20.0) ** 2)
    res = bootstrap_ci(data, sometimes, B=100)
    assert res.replicates.size == 100 and res.redraws > 0


def test_bootstrap_gives_up_after_ten_b_attempts():
    def never(d):
        if d.x.size == 20 and np.unique(d.x).size < 20:
            raise ParameterError("no")
        return 0.0

    with pytest.raises(ConvergenceError):
        bootstrap_ci(Dataset(np.arange(20.0), np.arange(20.0)), never, B=100)


# -- training corpus -------------------------------------------------------------


def test_target_mixture_low_fraction():
    cfg = CorpusConfig()
    rng = RngStream(0, 77)
    t = np.array([draw_target(rng, cfg) for _ in range(20000)])
    assert np.all((t >= 0) & (t <= 0.99))
    # 0.1 + 0.9 * 0.01 / 0.99
    assert abs(np.mean(t < 0.01) - (0.1 + 0.9 * 0.01 / 0.99)) <= 0.01


def test_corpus_layout_and_file(tmp_path):
    cfg = CorpusConfig(sample_sizes=(100, 200), per_cell=4, seed=3)
    path = tmp_path / "c.csv"
    corpus = make_training_corpus(cfg, path)
    assert len(corpus.bundles) == 2 * 2 * 4
    assert corpus.copulas[:8] == ["gaussian"] * 8
    assert list(corpus.sizes[:8]) == [100] * 4 + [200] * 4
    assert np.all((corpus.targets >= 0) & (corpus.targets <= 0.99))
    bundles, targets = read_bundles(path)
    assert np.array_equal(targets, corpus.targets)
    assert np.array_equal(bundles[5].features, corpus.bundles[5].features)
    again = make_training_corpus(cfg)
    assert np.array_equal(again.targets, corpus.targets)


def test_corpus_validation():
    with pytest.raises(DomainError):
        CorpusConfig(per_cell=0)
