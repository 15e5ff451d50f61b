import numpy as np
import pytest
import torch

from airseg_trainer.losses import bce_loss, combined_loss, focal_loss, soft_dice


def rand_pair(seed, shape=(8, 8), lo=0.05, hi=0.95):
    rng = np.random.default_rng(seed)
    probs = torch.tensor(rng.uniform(lo, hi, size=shape), dtype=torch.float64)
    target = torch.tensor((rng.random(shape) > 0.5).astype(np.float64))
    return probs, target


def central_difference_grad(fn, probs, h=1e-6):
    """Brute-force gradient oracle: central differences per element."""
    grad = torch.zeros_like(probs)
    flat = probs.flatten()
    for i in range(flat.numel()):
        orig = flat[i].item()
        flat[i] = orig + h
        hi = fn(probs).item()
        flat[i] = orig - h
        lo = fn(probs).item()
        flat[i] = orig
        grad.flatten()[i] = (hi - lo) / (2 * h)
    return grad


class TestFocalReductions:
    def test_gamma_zero_alpha_one_equals_bce(self):
        for seed in range(10):
            probs, target = rand_pair(seed, lo=0.01, hi=0.99)
            f = focal_loss(probs, target, alpha=1.0, gamma=0.0)
            b = bce_loss(probs, target)
            assert abs(f.item() - b.item()) < 1e-6

    def test_confident_correct_prediction_vanishes(self):
        target = torch.ones((4, 4), dtype=torch.float64)
        probs = torch.full((4, 4), 1.0 - 1e-6, dtype=torch.float64)
        assert focal_loss(probs, target).item() < 1e-9

    def test_down_weights_easy_samples(self):
        target = torch.ones((1,), dtype=torch.float64)
        easy = torch.tensor([0.9], dtype=torch.float64)
        hard = torch.tensor([0.1], dtype=torch.float64)
        # focal/BCE ratio should be far smaller for the easy sample
        easy_ratio = focal_loss(easy, target).item() / bce_loss(easy, target).item()
        hard_ratio = focal_loss(hard, target).item() / bce_loss(hard, target).item()
        assert easy_ratio < hard_ratio


class TestBceExamples:
    def test_all_half_is_ln2(self):
        # closed form: -log(0.5) = ln 2 per pixel regardless of the target
        probs = torch.full((6, 6), 0.5, dtype=torch.float64)
        target = (torch.arange(36, dtype=torch.float64).reshape(6, 6) % 2)
        assert bce_loss(probs, target).item() == pytest.approx(np.log(2.0), rel=1e-12)


class TestSoftDice:
    def test_perfect_binary_match(self):
        target = torch.tensor([[1.0, 0.0], [0.0, 1.0]], dtype=torch.float64)
        assert soft_dice(target, target).item() >= 1.0 - 1e-12

    def test_both_empty_with_smoothing(self):
        zeros = torch.zeros((4, 4), dtype=torch.float64)
        assert soft_dice(zeros, zeros).item() == pytest.approx(1.0)
        # hence the dice deficit term of the combined loss is 0
        assert (1.0 - soft_dice(zeros, zeros)).item() == pytest.approx(0.0)

    def test_disjoint_is_small(self):
        a = torch.tensor([[1.0, 0.0]], dtype=torch.float64)
        b = torch.tensor([[0.0, 1.0]], dtype=torch.float64)
        assert soft_dice(a, b).item() == pytest.approx(1.0 / 3.0)


class TestCombined:
    def test_nonnegative(self):
        for seed in range(5):
            probs, target = rand_pair(seed)
            assert combined_loss(probs, target).item() >= 0.0

    def test_perfect_prediction_near_floor(self):
        eps = 1e-6
        target = torch.tensor([[1.0, 0.0], [0.0, 1.0]], dtype=torch.float64)
        probs = torch.where(target > 0.5, 1.0 - eps, eps)
        assert combined_loss(probs, target).item() < 1e-4


class TestGradients:
    @pytest.mark.parametrize("name,fn", [
        ("combined", combined_loss),
        ("focal", lambda p, t: focal_loss(p, t, 0.25, 2.0)),
    ])
    def test_autograd_matches_finite_differences(self, name, fn):
        for seed in (0, 1, 2):
            probs, target = rand_pair(seed)
            probs.requires_grad_(True)
            fn(probs, target).backward()
            analytic = probs.grad.detach().clone()
            numeric = central_difference_grad(lambda p: fn(p, target),
                                              probs.detach().clone())
            rel = (analytic - numeric).norm() / numeric.norm()
            assert rel.item() < 1e-4, f"{name} gradient off by {rel.item():.2e}"
