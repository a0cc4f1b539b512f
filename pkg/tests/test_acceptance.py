"""Acceptance criteria, one test each.

Every test prints a ``PASS`` or ``FAIL`` line; the lines are repeated in the
pytest terminal summary.  Run directly with ``python tests/test_acceptance.py``
for the same lines without pytest.
"""

import contextlib
import io
import json
import math
import shutil
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

import gradcheck  # noqa: E402
import oracles  # noqa: E402
import test_indicators as ti  # noqa: E402
from cubic import codec, evaluation  # noqa: E402
from cubic.backtest import TradingConfig, annualized_return, run_backtest, sharpe  # noqa: E402
from cubic.dataset import featurize  # noqa: E402
from cubic.indicators import FEATURE_NAMES, IndicatorConfig  # noqa: E402
from cubic.losses import confidence_reg, default_weights, total_loss, weighted_ce  # noqa: E402
from cubic.market_data import SplitSpec  # noqa: E402
from cubic.model import ModelConfig, forward, init_params, init_weight, predict_from_logits  # noqa: E402
from cubic.synthetic import make_synthetic_panel  # noqa: E402
from cubic.training import TrainConfig, train  # noqa: E402

RESULTS: list[str] = []


def _run(number, title, check, budget=None):
    start = time.perf_counter()
    try:
        detail = check()
        elapsed = time.perf_counter() - start
        if budget is not None and elapsed >= budget:
            raise AssertionError(f"took {elapsed:.2f}s, budget {budget}s")
        ok, msg = True, detail or ""
    except AssertionError as exc:
        elapsed = time.perf_counter() - start
        ok, msg = False, str(exc)
    line = f"{'PASS' if ok else 'FAIL'} criterion {number:2d} {title}: {msg} [{elapsed:.2f}s]"
    RESULTS.append(line)
    print(line)
    if not ok:
        pytest.fail(line, pytrace=False)


def check_codec():
    k = codec.N_BITS
    grid = -1.0 + np.arange(2**k) * 2.0 ** -(k - 1)
    rand = np.random.default_rng(0).uniform(-1, 1, 10**5)
    for v in (grid, rand, np.array([-1.0, 1.0])):
        err = np.abs(codec.decode(codec.encode(v)) - v).max()
        assert err <= 2.0 ** -14, f"round-trip error {err}"
    codes = ((np.arange(2**k)[:, None] >> np.arange(k - 1, -1, -1)) & 1).astype(np.int8)
    assert np.array_equal(codec.encode(codec.decode(codes)), codes), "encode(decode) not identity"
    return "2^15 grid + 1e5 random values within 2^-14, all codes fixed"


def check_gradients():
    worst = max(gradcheck.max_relative_error(seed) for seed in range(20))
    assert worst <= 1e-4, f"max relative error {worst:.2e}"
    return f"max relative error {worst:.2e} over 20 toy models"


def check_permutations():
    rng = np.random.default_rng(0)
    cfg = ModelConfig(n_stocks=30)
    params = init_params(cfg)
    x = rng.normal(size=(8, cfg.window, cfg.n_stocks, cfg.n_features))
    base = forward(x, params, cfg)
    for i in range(100):
        assert forward(x[:, :, rng.permutation(30)], params, cfg).equals(base), f"permutation {i}"
    return "100 permutations bit-identical"


def check_confidence_bounds():
    rng = np.random.default_rng(0)
    scale = 10.0 ** rng.uniform(-3, 2, size=(10**4, 1))
    out = predict_from_logits(rng.normal(size=(10**4, 30)) * scale)
    for name in ("gc_mean", "gc_trend"):
        v = getattr(out, name)
        assert v.min() >= 0.5 and v.max() <= 1.0, f"{name} range [{v.min()}, {v.max()}]"
    dev = np.abs(out.bit_probs.sum(axis=-1) - 1).max()
    assert dev <= 1e-9, f"pair sum deviation {dev}"
    return f"gc in [0.5, 1], pair-sum deviation {dev:.1e}"


def check_loss_fixed_points():
    w = default_weights(15)
    rng = np.random.default_rng(0)
    for _ in range(20):
        bits = rng.integers(0, 2, 15)
        assert abs(weighted_ce(bits, np.zeros(30), w) - math.log(2)) <= 1e-9
        sat = np.where(np.eye(2)[bits].ravel() == 1, 25.0, -25.0)
        assert weighted_ce(bits, sat, w) < 1e-6
        out = predict_from_logits(sat)
        for variant, gc in (("mean", out.gc_mean), ("trend", out.gc_trend)):
            assert abs(confidence_reg(bits[0], sat, variant) + gc) <= 1e-9
        assert abs(total_loss(bits, sat, w, "ce+mean").l_total + 1.0) < 1e-6
    return "uniform ln 2, saturated CE < 1e-6, conf = -GC"


def check_indicators():
    rng = np.random.default_rng(2024)
    for trial in range(50):
        n = int(rng.integers(6, 11))
        o, h, l, c, v = oracles.random_bars(rng, n)
        got = ti.ind.stock_features(ti.series_from(o, h, l, c, v), ti.SMALL)
        want = oracles.all_features(o, h, l, c, v, 3, 3, 2, 4, 3)
        for j, name in enumerate(FEATURE_NAMES):
            for t in range(n):
                assert oracles.close_enough(got[t, j], want[name][t]), f"{name} bar {t} trial {trial}"
    for fn in (ti.test_sma_examples, ti.test_ema_examples, ti.test_rsi_boundaries_and_hand_example,
               ti.test_macd_examples, ti.test_stochastic_k_examples, ti.test_mfi_examples,
               ti.test_atr_examples, ti.test_adx_examples, ti.test_obv_examples,
               ti.test_valid_from_is_macd_signal_chain):
        fn()
    for o_, c_, e in ((10, 10, 1.0), (11, 10, 1.1), (9.5, 10, 0.95)):
        assert ti.ind.arithmetic_ratio(open=[o_], close=[c_])[0] == pytest.approx(e, abs=1e-15)
    return "16 indicators match on 50 random series; hand examples reproduce"


def check_learnability():
    syn = make_synthetic_panel(n_stocks=20, n_days=1500, seed=0)
    fz = featurize(syn.panel, SplitSpec(), IndicatorConfig(), window=5)
    mcfg = ModelConfig(n_stocks=20, seed=0)
    das, times = {}, {}
    for variant in ("ce_only", "ce+conf_mean", "ce+conf_trend"):
        start = time.perf_counter()
        tc = TrainConfig(learning_rate=1e-3, batch_size=32, max_epochs=50, loss_variant=variant, seed=0)
        _, log = train(fz.samples("train"), fz.samples("val"), mcfg, tc)
        times[variant] = time.perf_counter() - start
        das[variant] = log.best()["val_da"]
    summary = ", ".join(f"{k} DA {v:.3f} ({times[k]:.0f}s)" for k, v in das.items())
    assert all(v >= 0.85 for v in das.values()), summary
    assert all(das[k] >= das["ce_only"] - 0.02 for k in das), "non-degradation: " + summary
    assert all(t < 300 for t in times.values()), summary
    return summary


def check_backtest():
    rng = np.random.default_rng(0)
    none = TradingConfig(cost_rate=0.0, confidence_source="none")
    r = rng.normal(0, 0.01, 50)
    assert np.array_equal(run_backtest(r, np.full(50, 0.6), r, none).daily_returns, np.abs(r))
    one = run_backtest(np.ones(6), np.ones(6), np.zeros(6), TradingConfig(cost_rate=0.001))
    assert abs(one.total_cost - 0.001) < 1e-15
    alt = run_backtest(np.array([1, -1, 1, -1.0]), np.ones(4), np.zeros(4), TradingConfig(cost_rate=0.001))
    assert abs(alt.total_cost - 0.007) < 1e-15
    for _ in range(100):
        preds, conf = rng.normal(size=60), rng.uniform(0.5, 1, 60)
        rets = rng.normal(0, 0.01, 60)
        ars = [run_backtest(preds, conf, rets, TradingConfig(cost_rate=c)).ar
               for c in (0.0, 0.0005, 0.001, 0.002)]
        assert all(a >= b for a, b in zip(ars, ars[1:])), f"cost monotonicity {ars}"
    for _ in range(100):
        rets = rng.normal(0.0003, 0.012, 120)
        perfect = run_backtest(rets, np.ones(120), rets, none).ar
        assert perfect >= annualized_return(rets), "perfect foresight below buy-and-hold"
    return "cost examples exact, monotone in cost, foresight >= buy-and-hold"


def check_metrics():
    rng = np.random.default_rng(0)
    x = rng.normal(size=40)
    assert abs(evaluation.ic(x, x) - 1) < 1e-12 and abs(evaluation.ic(-x, x) + 1) < 1e-12
    assert abs(evaluation.ic([1, 2, 3], [1, 2, 2]) - math.sqrt(3) / 2) <= 1e-6
    closed = 0.02 / math.sqrt(2 / 3 * 1e-4) * math.sqrt(252)
    assert abs(sharpe([0.01, 0.02, 0.03]) - closed) <= 1e-6
    assert abs(evaluation.icir_from_ics([0.2, 0.4])[0] - 3.0) <= 1e-6
    assert evaluation.direction_accuracy([1, -1, 1, 1], [1, 1, 1, -1]) == 0.5
    for _ in range(100):
        p, a = rng.normal(size=30), rng.normal(size=30)
        s, b = rng.uniform(0.01, 100), rng.normal(0, 10)
        assert abs(evaluation.ic(s * p + b, a) - evaluation.ic(p, a)) < 1e-9
    return f"IC +-1, Pearson 0.866025, SR {closed:.6f}, affine invariance"


def check_determinism():
    from conftest import write_workspace
    from cubic import cli, pipeline
    import tempfile

    root = Path(tempfile.mkdtemp(prefix="cubic-det-"))
    try:
        cfg = write_workspace(root, n_stocks=5, n_days=400, seed=3, train={"max_epochs": 3})
        out = root / "run"
        reports = []
        for _ in range(2):
            shutil.rmtree(out, ignore_errors=True)
            for cmd in ("ingest", "train", "evaluate", "backtest"):
                with contextlib.redirect_stdout(io.StringIO()):
                    code = cli.main([cmd, "--config", str(cfg)])
                assert code == 0, cmd
            reports.append({n: (out / n).read_bytes()
                            for n in (pipeline.EVALUATE_JSON, pipeline.BACKTEST_JSON)})
        for name in reports[0]:
            assert reports[0][name] == reports[1][name], f"{name} differs between runs"
        json.loads(reports[0][pipeline.EVALUATE_JSON])
        return "evaluate.json and backtest.json byte-identical across two runs"
    finally:
        shutil.rmtree(root, ignore_errors=True)


def check_initialization():
    fan_in, fan_out = 400, 250
    targets = {
        "normal_0.01": 0.01**2,
        "kaiming_normal_fan_in": 2 / fan_in, "kaiming_uniform_fan_in": 2 / fan_in,
        "kaiming_normal_fan_out": 2 / fan_out, "kaiming_uniform_fan_out": 2 / fan_out,
        "xavier_normal": 2 / (fan_in + fan_out), "xavier_uniform": 2 / (fan_in + fan_out),
    }
    worst = 0.0
    for scheme, target in targets.items():
        w = init_weight(scheme, fan_in, fan_out, np.random.default_rng(7))
        assert w.size == 10**5
        rel = abs(w.var() / target - 1)
        assert rel <= 0.1, f"{scheme}: variance off by {rel:.1%}"
        worst = max(worst, rel)
    return f"all 7 schemes within {worst:.1%} of target variance"


CRITERIA = [
    (1, "codec round trip", check_codec, 1.0),
    (2, "gradient correctness", check_gradients, 30.0),
    (3, "permutation invariance", check_permutations, 5.0),
    (4, "confidence bounds", check_confidence_bounds, None),
    (5, "loss fixed points", check_loss_fixed_points, None),
    (6, "indicator oracle equivalence", check_indicators, None),
    (7, "synthetic learnability", check_learnability, 900.0),
    (8, "backtest accounting", check_backtest, None),
    (9, "metric oracles", check_metrics, None),
    (10, "determinism", check_determinism, None),
    (11, "initialization schemes", check_initialization, None),
]


@pytest.mark.parametrize("number,title,check,budget", CRITERIA, ids=[f"c{c[0]:02d}" for c in CRITERIA])
def test_criterion(number, title, check, budget):
    _run(number, title, check, budget)


if __name__ == "__main__":
    failed = 0
    for spec in CRITERIA:
        try:
            _run(*spec)
        except pytest.fail.Exception:
            failed += 1
    sys.exit(1 if failed else 0)
