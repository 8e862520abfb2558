"""Synthetic datasets for demos and offline test runs.

``synthetic_digits`` builds a 784-feature, 10-class image-like surrogate:
each class is a smooth random template on a 28x28 grid, observed with
per-sample intensity jitter, a shared low-rank background and pixel noise.
That gives the strongly correlated feature structure the collinearity
probes need without shipping real image data. ``load_mnist`` picks up a
local ``mnist.npz`` when one is available and returns None otherwise.
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np


def _smooth_field(rng: np.random.Generator, side: int, n_bumps: int) -> np.ndarray:
    """Sum of random Gaussian bumps on a side x side grid, flattened."""
    yy, xx = np.mgrid[0:side, 0:side]
    field = np.zeros((side, side))
    for _ in range(n_bumps):
        cy, cx = rng.uniform(4, side - 4, size=2)
        width = rng.uniform(2.0, 4.5)
        amp = rng.uniform(0.5, 1.0)
        field += amp * np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * width**2))
    return field.ravel()


def synthetic_digits(
    n: int,
    seed: int,
    *,
    n_classes: int = 10,
    side: int = 28,
    noise: float = 0.12,
) -> tuple[np.ndarray, np.ndarray]:
    """Image-like surrogate: (X, labels) with X of shape (n, side*side).

    Rows are class template x intensity + shared background + noise,
    clipped to [0, 1] like normalized pixel data.
    """
    rng = np.random.default_rng(seed)
    templates = np.stack([_smooth_field(rng, side, n_bumps=6) for _ in range(n_classes)])
    background = np.stack([_smooth_field(rng, side, n_bumps=3) for _ in range(4)])

    labels = rng.integers(0, n_classes, size=n)
    intensity = rng.uniform(0.7, 1.3, size=n)
    bg_mix = rng.normal(0.0, 0.25, size=(n, background.shape[0]))
    X = templates[labels] * intensity[:, None]
    X += bg_mix @ background
    X += rng.normal(0.0, noise, size=X.shape)
    return np.clip(X, 0.0, 1.0), labels


def load_mnist(max_rows: int | None = None) -> tuple[np.ndarray, np.ndarray] | None:
    """Load a locally cached mnist.npz (keras layout) when present.

    Searches $POLYKIT_MNIST, ./mnist.npz and ~/.keras/datasets/mnist.npz.
    Returns (X, labels) with pixel values scaled to [0, 1], or None.
    """
    candidates = []
    env = os.environ.get("POLYKIT_MNIST")
    if env:
        candidates.append(Path(env))
    candidates.append(Path("mnist.npz"))
    candidates.append(Path.home() / ".keras" / "datasets" / "mnist.npz")
    for path in candidates:
        if not path.is_file():
            continue
        with np.load(path) as data:
            X = data["x_train"].reshape(len(data["x_train"]), -1).astype(np.float64) / 255.0
            y = data["y_train"].astype(int)
        if max_rows is not None:
            X, y = X[:max_rows], y[:max_rows]
        return X, y
    return None


def quadratic_response(
    n: int,
    seed: int,
    *,
    noise: float = 0.5,
) -> tuple[np.ndarray, np.ndarray]:
    """Two-feature regression data with genuine quadratic structure."""
    rng = np.random.default_rng(seed)
    X = rng.uniform(-2.0, 2.0, size=(n, 2))
    u, v = X[:, 0], X[:, 1]
    y = 1.0 + 2.0 * u + 3.0 * v - u * v + v**2 + rng.normal(0.0, noise, size=n)
    return X, y


def linear_response(
    n: int,
    seed: int,
    *,
    noise: float = 0.5,
) -> tuple[np.ndarray, np.ndarray]:
    """Two-feature regression data that is exactly linear plus noise."""
    rng = np.random.default_rng(seed)
    X = rng.uniform(-2.0, 2.0, size=(n, 2))
    y = 1.0 + 2.0 * X[:, 0] - 1.5 * X[:, 1] + rng.normal(0.0, noise, size=n)
    return X, y
