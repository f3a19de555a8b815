import numpy as np
import pytest

import cedl.trainer as trainer_mod
from cedl.data import Dataset, gen_gaussian_clusters
from cedl.encoder import LayerSpec, forward, init_encoder
from cedl.exceptions import DegenerateSplitError, DimensionError, DivergenceError
from cedl.objective import ObjectiveConfig, cedl_loss, radial_logit
from cedl.trainer import TrainConfig, batch_iterator, train


def _two_clusters(n_norm=60, n_anom=20, seed=0):
    return gen_gaussian_clusters([((0.0, 0.0), 0.3, n_norm, 0), ((3.0, 0.0), 0.3, n_anom, 1)], seed=seed)


def _model(seed=0, in_dim=2, latent=2):
    return init_encoder([LayerSpec(in_dim, 8, "relu"), LayerSpec(8, latent, "tanh")], seed)


def test_batch_iterator_sizes():
    batches = batch_iterator(10, 4, seed=0)
    assert [len(b) for b in batches] == [4, 4, 2]
    assert sorted(np.concatenate(batches).tolist()) == list(range(10))
    assert [len(b) for b in batch_iterator(3, 100)] == [3]
    ordered = batch_iterator(5, 2, shuffle=False)
    assert [b.tolist() for b in ordered] == [[0, 1], [2, 3], [4]]


def test_batch_iterator_deterministic_per_epoch():
    a = batch_iterator(50, 8, seed=3, epoch=2)
    b = batch_iterator(50, 8, seed=3, epoch=2)
    c = batch_iterator(50, 8, seed=3, epoch=3)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    assert not np.array_equal(np.concatenate(a), np.concatenate(c))


def test_one_step_per_epoch_when_batch_covers_data():
    ds = _two_clusters(10, 5)
    rep = train(ds, _model(), TrainConfig(epochs=7, batch_size=100, learning_rate=1e-3))
    assert rep.steps == 7 and len(rep.epoch_losses) == 7


def test_zero_learning_rate_freezes_everything():
    ds = _two_clusters()
    model = _model()
    rep = train(ds, model, TrainConfig(epochs=4, batch_size=16, learning_rate=0.0))
    assert len(set(rep.epoch_losses)) == 1 or np.ptp(rep.epoch_losses) <= 1e-15
    for p, q in zip(rep.model.parameters(), model.parameters()):
        np.testing.assert_array_equal(p, q)


def test_epoch_loss_is_per_sample_mean():
    # with lr = 0 the epoch loss is the plain mean of per-sample losses,
    # whatever the batch partition
    ds = _two_clusters(37, 11)
    model = _model(5)
    cfg = ObjectiveConfig.at_origin(2, alpha=1.5, w1=37 / 11)
    R, _ = forward(model, ds.X)
    per_sample = [cedl_loss(radial_logit(r, cfg), int(t), cfg) for r, t in zip(R, ds.y)]
    expected = sum(per_sample) / len(per_sample)
    for bs in (1, 5, 16, 48, 64):
        rep = train(ds, model, TrainConfig(epochs=1, batch_size=bs, learning_rate=0.0, objective_config=cfg))
        assert rep.epoch_losses[0] == pytest.approx(expected, rel=1e-12, abs=1e-12)


def test_same_batch_schedule_across_objectives(monkeypatch):
    calls = {}
    real = trainer_mod.batch_iterator

    def spy(*args, **kwargs):
        out = real(*args, **kwargs)
        calls.setdefault(current[0], []).append([b.tolist() for b in out])
        return out

    monkeypatch.setattr(trainer_mod, "batch_iterator", spy)
    ds = _two_clusters()
    current = [None]
    for kind in ("cedl", "bce", "svdd", "sad"):
        current[0] = kind
        train(ds, _model(), TrainConfig(epochs=3, batch_size=16, learning_rate=1e-3, objective=kind))
    ref = calls["cedl"]
    assert all(calls[k] == ref for k in ("bce", "svdd", "sad"))


def test_best_loss_non_increasing_in_epochs():
    ds = _two_clusters()
    prev = None
    bests = []
    for E in range(1, 6):
        rep = train(ds, _model(1), TrainConfig(epochs=E, batch_size=16, learning_rate=1e-2))
        if prev is not None:
            assert rep.epoch_losses[:-1] == prev
        prev = rep.epoch_losses
        bests.append(rep.best_loss)
    assert all(b <= a for a, b in zip(bests, bests[1:]))
    assert rep.best_loss == min(rep.epoch_losses)
    assert rep.epoch_losses[rep.best_epoch] == rep.best_loss


def test_training_separates_two_clusters():
    ds = _two_clusters(200, 40)
    cfg = ObjectiveConfig.at_origin(2, w1=200 / 40)
    rep = train(ds, _model(2), TrainConfig(epochs=60, batch_size=32, learning_rate=1e-2, objective_config=cfg))
    R, _ = forward(rep.model, ds.X)
    d = np.linalg.norm(R, axis=1)
    assert d[ds.y == 0].mean() < d[ds.y == 1].mean()
    assert rep.epoch_losses[-1] < rep.epoch_losses[0]


def test_learnable_centre_moves():
    ds = _two_clusters()
    cfg = ObjectiveConfig.at_origin(2, centre_mode="learnable")
    rep = train(ds, _model(), TrainConfig(epochs=5, batch_size=16, learning_rate=1e-2, objective_config=cfg))
    assert not np.array_equal(rep.objective_config.centre, np.zeros(2))


def test_training_is_deterministic():
    ds = _two_clusters()
    a = train(ds, _model(), TrainConfig(epochs=3, batch_size=16, learning_rate=1e-3, objective="bce"))
    b = train(ds, _model(), TrainConfig(epochs=3, batch_size=16, learning_rate=1e-3, objective="bce"))
    assert a.epoch_losses == b.epoch_losses
    for p, q in zip(a.model.parameters(), b.model.parameters()):
        assert p.tobytes() == q.tobytes()
    assert a.head_params["u"].tobytes() == b.head_params["u"].tobytes()


def test_degenerate_and_dimension_errors():
    only_normal = Dataset(np.zeros((5, 2)), [0] * 5)
    for kind in ("cedl", "bce", "sad"):
        with pytest.raises(DegenerateSplitError):
            train(only_normal, _model(), TrainConfig(epochs=1, objective=kind))
    train(only_normal, _model(), TrainConfig(epochs=1, objective="svdd"))
    with pytest.raises(DimensionError):
        train(Dataset(np.zeros((4, 3)), [0, 1, 0, 1]), _model(), TrainConfig(epochs=1))


def test_divergence_is_reported():
    model = init_encoder([LayerSpec(2, 2, "identity")], 0)
    model = model.with_parameters([np.full((2, 2), 1e308), np.zeros(2)])
    ds = Dataset(np.full((4, 2), 1e10), [0, 1, 0, 1])
    with np.errstate(all="ignore"):
        with pytest.raises(DivergenceError, match="epoch 0, batch 0"):
            train(ds, model, TrainConfig(epochs=1, batch_size=2))


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(epochs=0)
    with pytest.raises(ValueError):
        TrainConfig(batch_size=0)
    with pytest.raises(ValueError):
        TrainConfig(learning_rate=-1)
    with pytest.raises(ValueError):
        TrainConfig(objective="hinge")
