"""Desk-scale networks for the four tasks.

Layer counts and kernel sizes are fixed per task; channel counts and
hidden widths are chosen so that the LM normal matrix (p x p, or m x m in its
dual form) fits in a few hundred MB.
"""

from __future__ import annotations

from ..nn import Conv2d, Dense, Flatten, MaxPool2d, NetworkSpec, ReLU


def mnist_net() -> NetworkSpec:
    # 1x28x28 -> 4x24x24 -> 3x20x20 -> pool 3x10x10 -> 8 -> 10 ; 2905 params
    return NetworkSpec(
        (1, 28, 28),
        (
            Conv2d(4, 5, 5), ReLU(),
            Conv2d(3, 5, 5), ReLU(),
            MaxPool2d(2, 2), Flatten(),
            Dense(8), ReLU(),
            Dense(10),
        ),
    )


def cifar_net() -> NetworkSpec:
    # 3x32x32 -> 3x28x28 -> 3x24x24 -> pool 3x12x12 -> 6 -> 6 -> 10 ; 3166 params
    return NetworkSpec(
        (3, 32, 32),
        (
            Conv2d(3, 5, 5), ReLU(),
            Conv2d(3, 5, 5), ReLU(),
            MaxPool2d(2, 2), Flatten(),
            Dense(6), ReLU(),
            Dense(6), ReLU(),
            Dense(10),
        ),
    )


def flappy_net() -> NetworkSpec:
    # 1x84x84 -> 32x20x20 -> 64x9x9 -> 64x7x7 -> 64 -> 2
    return NetworkSpec(
        (1, 84, 84),
        (
            Conv2d(32, 8, 8, stride=4), ReLU(),
            Conv2d(64, 4, 4, stride=2), ReLU(),
            Conv2d(64, 3, 3, stride=1), ReLU(),
            Flatten(),
            Dense(64), ReLU(),
            Dense(2),
        ),
    )


def cartpole_net() -> NetworkSpec:
    return NetworkSpec((4,), (Dense(64), ReLU(), Dense(2)))


ARCHITECTURES = {
    "mnist": mnist_net,
    "cifar": cifar_net,
    "flappy": flappy_net,
    "cartpole": cartpole_net,
}
