import math

import numpy as np
import pytest

from nmgen import numerics as nx
from nmgen.policy import LSTMPolicy, PolicyConfig
from nmgen.trainer import (AllStepsMasked, ReconstructionError, RolloutStep, TrainConfig,
                           aux_end_loss, batch_loss, beta_schedule, format_log, kl_divergence,
                           kl_loss, rollout_oracle, train)
from nmgen.tree import END


def small(**kw):
    cfg = dict(n_actions=6, d_emb=8, d_hidden=8, max_depth=6, d_enc=4)
    cfg.update(kw)
    return LSTMPolicy(PolicyConfig(**cfg), seed=1)


def numpy_log_probs(pol, prefix):
    """Independent float64 forward pass of a one-layer policy."""
    p = {k: v.data.astype(np.float64) for k, v in pol.params.items()}
    H = pol.config.d_hidden
    h, c = np.zeros(H), np.zeros(H)
    sig = lambda z: 1 / (1 + np.exp(-z))
    for a in prefix:
        g = p["emb"][a] @ p["lstm0.wx"] + h @ p["lstm0.wh"] + p["lstm0.b"]
        c = sig(g[H:2 * H]) * c + sig(g[:H]) * np.tanh(g[3 * H:])
        h = sig(g[2 * H:3 * H]) * np.tanh(c)
    z = h @ p["head.u"] + p["head.b"]
    z = z - z.max()
    return z - np.log(np.exp(z).sum())


@pytest.mark.parametrize("epoch,expected", [
    (0, 1.0), (19, 1.0), (20, 1.0), (21, 0.95), (30, 0.5), (39, 0.05), (40, 0.0), (100, 0.0),
])
def test_beta_schedule(epoch, expected):
    assert beta_schedule(epoch, 20, 0.05) == expected


def test_beta_schedule_fast_anneal_is_exact():
    trace = [beta_schedule(e, 5, 0.2) for e in range(12)]
    assert trace == [1.0] * 6 + [0.8, 0.6, 0.4, 0.2, 0.0, 0.0]


def test_kl_examples():
    assert kl_divergence({1: 1.0}, np.array([0, 0.5, 0.5])) == pytest.approx(math.log(2))
    assert kl_divergence({1: 0.5, 2: 0.5}, np.array([0, 0.5, 0.5])) == pytest.approx(0.0)
    # one-hot target: KL reduces to the negative log-likelihood
    assert kl_divergence({2: 1.0}, np.array([0.7, 0.2, 0.1])) == pytest.approx(-math.log(0.1))
    # floored log keeps zero-probability targets finite
    assert math.isfinite(kl_divergence({0: 1.0}, np.array([0.0, 1.0])))


def test_kl_loss_averages_unmasked_steps():
    steps = [
        RolloutStep(0, 1, np.array([0, 0.5, 0.5]), {1: 1.0}),
        RolloutStep(1, END, np.array([1.0, 0, 0]), {END: 1.0}),
        RolloutStep(2, END, np.array([0.5, 0.5, 0]), {END: 1.0}, masked=True),
    ]
    assert kl_loss(steps) == pytest.approx(math.log(2) / 2)
    with pytest.raises(AllStepsMasked):
        kl_loss([RolloutStep(0, END, np.ones(1), {END: 1.0}, masked=True)])


def test_aux_end_loss_cases():
    # empty target: only the end decision exists, pure BCE
    only_end = [RolloutStep(0, END, np.ones(3) / 3, {END: 1.0}, masked=True)]
    assert aux_end_loss(only_end, [0.8]) == pytest.approx(-math.log(0.8))
    # one token: token step contributes both terms, the two end steps BCE only
    steps = [
        RolloutStep(0, 1, np.array([0, 0.25, 0.75]), {1: 1.0}),
        RolloutStep(1, END, np.zeros(3), {END: 1.0}, masked=True),
        RolloutStep(2, END, np.zeros(3), {END: 1.0}, masked=True),
    ]
    bce = (-math.log(0.9) - 2 * math.log(0.5)) / 3
    assert aux_end_loss(steps, [0.1, 0.5, 0.5]) == pytest.approx(bce - math.log(0.25))


def test_rollout_records_every_step():
    pol = small()
    steps = rollout_oracle((2, 3), "leftright", pol)
    assert len(steps) == 5
    assert [s.action for s in steps] == [2, END, 3, END, END]
    assert all(set(s.oracle.values()) == {1.0} for s in steps)


def test_aux_rollout_masks_end_steps():
    pol = small(aux_end=True)
    steps = rollout_oracle((2,), "uniform", pol)
    assert [s.masked for s in steps] == [False, True, True]
    steps = rollout_oracle((), "uniform", pol)
    assert [s.masked for s in steps] == [True]


@pytest.mark.parametrize("target", [(2,), (2, 3), (3, 2, 4, 5), (5, 5, 2)])
def test_leftright_kl_equals_nll(target):
    pol = small()
    steps = rollout_oracle(target, "leftright", pol)
    actions = [s.action for s in steps]
    nll = []
    for t, a in enumerate(actions):
        nll.append(-numpy_log_probs(pol, actions[:t])[a])
    for s, ref in zip(steps, nll):
        assert s.kl == pytest.approx(ref, abs=1e-5)
    res = batch_loss(pol, [target], "leftright")
    assert res.loss.item() == pytest.approx(np.mean(nll), abs=1e-5)


def test_batch_loss_is_mean_of_single_losses():
    pol = small()
    targets = [(2, 3), (4,), (5, 2, 3)]
    joint = batch_loss(pol, targets, "leftright").loss.item()
    single = [batch_loss(pol, [t], "leftright").loss.item() for t in targets]
    assert joint == pytest.approx(np.mean(single), abs=1e-6)


@pytest.mark.parametrize("kind", ["uniform", "coaching", "annealed", "leftright"])
def test_batch_loss_is_true_kl(kind):
    pol = small()
    rngs = [np.random.default_rng(7)]
    res = batch_loss(pol, [(2, 3, 3, 4)], kind, 0.5, rngs, record=True)
    expected = np.mean([s.kl for s in res.steps[0]])
    assert res.loss.item() == pytest.approx(expected, abs=1e-5)
    assert res.loss.item() >= -1e-6


def test_debug_mode_checks_reconstruction(monkeypatch):
    from nmgen import trainer
    pol = small()
    nx.tensor.DEBUG = True
    try:
        batch_loss(pol, [(2, 3, 4)], "uniform")
        monkeypatch.setattr(trainer, "in_order_sentence", lambda tree: (9,))
        with pytest.raises(ReconstructionError):
            batch_loss(pol, [(2, 3, 4)], "uniform")
    finally:
        nx.tensor.DEBUG = False


def test_zero_learning_rate_leaves_parameters():
    pol = small()
    before = {k: v.data.copy() for k, v in pol.params.items()}
    train(pol, [(2, 3), (4,)], TrainConfig(oracle="uniform", epochs=2, lr=0.0, batch_size=2))
    for k, v in pol.params.items():
        np.testing.assert_array_equal(v.data, before[k])


def test_training_reduces_loss():
    pol = small()
    corpus = [(2, 3, 4), (3, 4), (2, 5)]
    cfg = TrainConfig(oracle="leftright", epochs=60, lr=0.02, batch_size=3, lr_halve_every=100)
    hist = train(pol, corpus, cfg)
    assert hist[-1]["loss"] < 0.5 * hist[0]["loss"]


def test_training_is_deterministic():
    corpus = [(2, 3, 4), (3, 4), (2, 5), (5,)]
    cfg = TrainConfig(oracle="annealed", epochs=3, batch_size=2, beta_burn_in=1, beta_rate=0.5)
    runs = []
    for _ in range(2):
        pol = small()
        hist = train(pol, corpus, cfg)
        runs.append(([format_log(r) for r in hist],
                     b"".join(v.data.tobytes() for v in pol.params.values())))
    assert runs[0] == runs[1]


def test_conditional_training_runs():
    pol = small(conditional=True, aux_end=True, tree_enc=True)
    corpus = [(2, 3), (4, 5, 2)]
    hist = train(pol, corpus, TrainConfig(oracle="coaching", epochs=2, aux_end=True),
                 bags=[list(c) for c in corpus])
    assert len(hist) == 2 and all(math.isfinite(r["loss"]) for r in hist)


def test_select_best_restores_parameters():
    pol = small()
    snapshots = []

    def validate(policy, epoch):
        snapshots.append(policy.params["emb"].data.copy())
        return [5.0, 9.0, 1.0][epoch]

    train(pol, [(2, 3)], TrainConfig(oracle="leftright", epochs=3, lr=0.05), validate=validate,
          select_best=True)
    np.testing.assert_array_equal(pol.params["emb"].data, snapshots[1])


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(oracle="magic")
    with pytest.raises(ValueError):
        TrainConfig(batch_size=0)
    with pytest.raises(ValueError):
        TrainConfig(rollin="sideways")


def test_format_log():
    rec = {"epoch": 3, "loss": 1.25, "beta": 0.5, "lr": 0.001, "val_bleu": None}
    assert format_log(rec) == "epoch=3 loss=1.250000 beta=0.5000 lr=0.001"
    rec["val_bleu"] = 12.5
    assert format_log(rec).endswith("val_bleu=12.5000")
