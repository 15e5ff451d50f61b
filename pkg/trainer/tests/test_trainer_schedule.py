import pytest

from airseg_trainer.schedule import EarlyStopping, PlateauScheduler


def run_schedule(losses, **kwargs):
    sched = PlateauScheduler(**kwargs)
    return [sched.step(v) for v in losses]


class TestPlateauScheduler:
    def test_never_improving_run(self):
        # first epoch sets the best; three bad epochs then trigger each cut,
        # so the LR changes at the end of epochs 4 and 7 and floors at 1e-5
        lrs = run_schedule([1.0] * 12)
        assert lrs == [1e-3, 1e-3, 1e-3,
                       1e-4, 1e-4, 1e-4,
                       1e-5, 1e-5, 1e-5, 1e-5, 1e-5, 1e-5]

    def test_floor_is_min_lr(self):
        lrs = run_schedule([1.0] * 40)
        assert min(lrs) == 1e-5
        assert lrs[-1] == 1e-5

    def test_improvement_resets_patience(self):
        # two bad epochs, an improvement, then two more bad: never cuts
        lrs = run_schedule([1.0, 1.1, 1.2, 0.9, 1.0, 1.1])
        assert lrs == [1e-3] * 6

    def test_equal_loss_counts_as_no_improvement(self):
        lrs = run_schedule([1.0, 1.0, 1.0, 1.0])
        assert lrs == [1e-3, 1e-3, 1e-3, 1e-4]

    def test_monotone_decreasing_loss_keeps_lr(self):
        lrs = run_schedule([1.0 - 0.01 * i for i in range(20)])
        assert lrs == [1e-3] * 20

    def test_custom_factor_and_patience(self):
        sched = PlateauScheduler(lr_init=1.0, factor=0.5, patience=1, min_lr=0.2)
        lrs = [sched.step(v) for v in [1.0, 1.0, 1.0, 1.0, 1.0]]
        assert lrs == [1.0, 0.5, 0.25, 0.2, 0.2]

    def test_invalid_parameters(self):
        with pytest.raises(ValueError):
            PlateauScheduler(factor=1.0)
        with pytest.raises(ValueError):
            PlateauScheduler(lr_init=1e-5, min_lr=1e-5)
        with pytest.raises(ValueError):
            PlateauScheduler(patience=0)


class TestEarlyStopping:
    def test_fires_at_best_plus_patience(self):
        stop = EarlyStopping(patience=10)
        fired = [stop.step(1.0) for _ in range(11)]
        # best is epoch 1; the 10th non-improving epoch is epoch 11
        assert fired == [False] * 10 + [True]
        assert stop.best_epoch == 1

    def test_improvement_extends_training(self):
        stop = EarlyStopping(patience=3)
        assert not stop.step(1.0)
        assert not stop.step(1.1)
        assert not stop.step(0.9)  # new best at epoch 3
        assert not stop.step(1.0)
        assert not stop.step(1.0)
        assert stop.step(1.0)  # epoch 6 == best + 3
        assert stop.best_epoch == 3

    def test_strictly_decreasing_never_stops(self):
        stop = EarlyStopping(patience=2)
        assert not any(stop.step(1.0 - 0.01 * i) for i in range(30))

    def test_invalid_patience(self):
        with pytest.raises(ValueError):
            EarlyStopping(patience=0)
