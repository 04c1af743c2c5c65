"""Self-contained CartPole and a minimal Flappy-Bird-like game."""

from __future__ import annotations

import math
from pathlib import Path
from typing import Protocol

import numpy as np

from ..errors import ContractError


class Environment(Protocol):
    action_count: int
    observation_shape: tuple[int, ...]

    def reset(self, seed: int) -> np.ndarray: ...

    def step(self, action: int) -> tuple[np.ndarray, float, bool]: ...


class CartPoleEnv:
    """Cart-pole balancing with explicit Euler integration.

    Observation is ``[x, x_dot, theta, theta_dot]``; reward is +1 per step.
    """

    gravity = 9.8
    cart_mass = 1.0
    pole_mass = 0.1
    half_length = 0.5
    force_mag = 10.0
    tau = 0.02
    x_limit = 2.4
    theta_limit = 12 * 2 * math.pi / 360
    max_steps = 500

    action_count = 2
    observation_shape = (4,)

    def __init__(self):
        self.state = np.zeros(4)
        self.steps = 0
        self.done = True

    def reset(self, seed: int) -> np.ndarray:
        rng = np.random.default_rng(seed)
        self.state = rng.uniform(-0.05, 0.05, size=4)
        self.steps = 0
        self.done = False
        return self.state.copy()

    def step(self, action: int) -> tuple[np.ndarray, float, bool]:
        if self.done:
            raise ContractError("step() called on a finished episode; call reset()")
        if action not in (0, 1):
            raise ValueError(f"invalid action {action}")
        x, x_dot, theta, theta_dot = self.state
        force = self.force_mag if action == 1 else -self.force_mag
        total_mass = self.cart_mass + self.pole_mass
        pole_ml = self.pole_mass * self.half_length
        cos, sin = math.cos(theta), math.sin(theta)

        temp = (force + pole_ml * theta_dot**2 * sin) / total_mass
        theta_acc = (self.gravity * sin - cos * temp) / (
            self.half_length * (4.0 / 3.0 - self.pole_mass * cos**2 / total_mass)
        )
        x_acc = temp - pole_ml * theta_acc * cos / total_mass

        x = x + self.tau * x_dot
        x_dot = x_dot + self.tau * x_acc
        theta = theta + self.tau * theta_dot
        theta_dot = theta_dot + self.tau * theta_acc
        self.state = np.array([x, x_dot, theta, theta_dot])
        self.steps += 1

        self.done = bool(
            abs(x) > self.x_limit or abs(theta) > self.theta_limit or self.steps >= self.max_steps
        )
        return self.state.copy(), 1.0, self.done


class FlappyEnv:
    """Side-scrolling bird between pipe pairs, observed as a 1x84x84 binary frame.

    Action 1 sets an upward velocity, action 0 lets gravity act.  Reward is
    +0.1 per surviving step plus 1 for each pipe passed; touching a pipe, the
    floor or the ceiling ends the episode with -1.
    """

    size = 84
    bird_x = 18
    bird_w = 6
    bird_h = 5
    pipe_w = 8
    gap = 30
    spacing = 40
    scroll = 2
    gravity = 0.6
    flap_velocity = -2.5
    first_pipe_x = 60
    max_steps = 2000

    action_count = 2
    observation_shape = (1, 84, 84)

    def __init__(self):
        self.done = True

    def reset(self, seed: int) -> np.ndarray:
        self.rng = np.random.default_rng(seed)
        self.y = (self.size - self.bird_h) / 2.0
        self.velocity = 0.0
        self.pipes: list[list[float]] = []
        self.steps = 0
        self.done = False
        x = self.first_pipe_x
        while x < self.size + self.spacing:
            self._spawn(x)
            x += self.spacing
        return self.render()

    def _spawn(self, x: float) -> None:
        half = self.gap // 2
        center = int(self.rng.integers(half + 6, self.size - half - 6 + 1))
        self.pipes.append([float(x), center, False])

    @property
    def altitude(self) -> float:
        return self.size - self.y - self.bird_h

    def _bird_rows(self) -> tuple[int, int]:
        top = int(math.floor(self.y))
        return top, top + self.bird_h

    def _collides(self) -> bool:
        top, bottom = self._bird_rows()
        if top < 0 or bottom > self.size:
            return True
        left, right = self.bird_x, self.bird_x + self.bird_w
        for x, center, _ in self.pipes:
            px = int(math.floor(x))
            if px < right and px + self.pipe_w > left:
                gap_top = center - self.gap // 2
                if top < gap_top or bottom > gap_top + self.gap:
                    return True
        return False

    def step(self, action: int) -> tuple[np.ndarray, float, bool]:
        if self.done:
            raise ContractError("step() called on a finished episode; call reset()")
        if action not in (0, 1):
            raise ValueError(f"invalid action {action}")
        self.velocity = self.flap_velocity if action == 1 else self.velocity + self.gravity
        self.y += self.velocity
        for pipe in self.pipes:
            pipe[0] -= self.scroll
        self.steps += 1

        if self._collides():
            self.done = True
            return self.render(), -1.0, True

        reward = 0.1
        for pipe in self.pipes:
            if not pipe[2] and pipe[0] + self.pipe_w <= self.bird_x:
                pipe[2] = True
                reward += 1.0
        self.pipes = [p for p in self.pipes if p[0] + self.pipe_w > 0]
        while self.pipes[-1][0] < self.size:
            self._spawn(self.pipes[-1][0] + self.spacing)
        self.done = self.steps >= self.max_steps
        return self.render(), reward, self.done

    def render(self) -> np.ndarray:
        frame = np.zeros(self.observation_shape)
        for x, center, _ in self.pipes:
            lo = max(int(math.floor(x)), 0)
            hi = min(int(math.floor(x)) + self.pipe_w, self.size)
            if lo >= hi:
                continue
            gap_top = center - self.gap // 2
            frame[0, :gap_top, lo:hi] = 1.0
            frame[0, gap_top + self.gap:, lo:hi] = 1.0
        top, bottom = self._bird_rows()
        frame[0, max(top, 0):min(bottom, self.size), self.bird_x:self.bird_x + self.bird_w] = 1.0
        return frame


def write_pgm(path: str | Path, frame: np.ndarray) -> None:
    """Binary PGM (P5, maxval 255) of a single-channel frame with values in [0, 1]."""
    img = np.asarray(frame).reshape(frame.shape[-2], frame.shape[-1])
    pixels = np.clip(np.rint(img * 255.0), 0, 255).astype(np.uint8)
    h, w = pixels.shape
    Path(path).write_bytes(f"P5\n{w} {h}\n255\n".encode("ascii") + pixels.tobytes())
