"""Latent space definition, prior sampling, reparameterization and permute-dim."""

from __future__ import annotations

from dataclasses import dataclass

import torch

LOGVAR_MIN = -10.0
LOGVAR_MAX = 10.0


@dataclass(frozen=True)
class LatentSpec:
    """Layout of the generator input: discrete codes, continuous codes, noise.

    ``discrete_codes`` lists the number of categories of each discrete code.
    The code part (discrete + continuous) is the semantics-bearing block the
    mutual-information and independence constraints act on; the noise block is
    unconstrained.
    """

    discrete_codes: tuple[int, ...] = ()
    n_continuous: int = 0
    n_noise: int = 0

    def __post_init__(self):
        object.__setattr__(self, "discrete_codes", tuple(int(c) for c in self.discrete_codes))
        if any(c < 2 for c in self.discrete_codes):
            raise ValueError(f"discrete codes need >= 2 categories, got {self.discrete_codes}")
        if self.n_continuous < 0 or self.n_noise < 0:
            raise ValueError("n_continuous and n_noise must be >= 0")
        if self.input_width < 1:
            raise ValueError("latent spec is empty: generator input width must be >= 1")

    @property
    def onehot_width(self) -> int:
        return sum(self.discrete_codes)

    @property
    def code_width(self) -> int:
        return self.onehot_width + self.n_continuous

    @property
    def input_width(self) -> int:
        return self.onehot_width + self.n_continuous + self.n_noise

    def to_dict(self) -> dict:
        return {
            "discrete": list(self.discrete_codes),
            "continuous": self.n_continuous,
            "noise": self.n_noise,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LatentSpec":
        return cls(
            discrete_codes=tuple(d.get("discrete", ())),
            n_continuous=int(d.get("continuous", 0)),
            n_noise=int(d.get("noise", 0)),
        )


@dataclass
class LatentBatch:
    """One sampled batch of latent variables.

    ``discrete`` holds per-code category indices with shape [batch, n_codes]
    (n_codes may be zero), ``discrete_onehot`` the matching one-hot encoding
    with shape [batch, sum(categories)].
    """

    discrete: torch.Tensor
    discrete_onehot: torch.Tensor
    continuous: torch.Tensor
    noise: torch.Tensor

    @property
    def batch_size(self) -> int:
        return self.continuous.shape[0]

    def generator_input(self) -> torch.Tensor:
        """Concatenate [one-hot | continuous | noise] into the generator input."""
        return torch.cat([self.discrete_onehot, self.continuous, self.noise], dim=1)


@dataclass
class GaussianPosterior:
    """Diagonal-Gaussian posterior over the continuous codes, one row per sample."""

    mean: torch.Tensor
    std: torch.Tensor

    def __post_init__(self):
        if self.mean.shape != self.std.shape:
            raise ValueError(f"mean/std shape mismatch: {tuple(self.mean.shape)} vs {tuple(self.std.shape)}")

    @classmethod
    def from_logvar(cls, mean: torch.Tensor, logvar: torch.Tensor) -> "GaussianPosterior":
        """Build a posterior with strictly positive std from an unconstrained log-variance."""
        logvar = torch.clamp(logvar, LOGVAR_MIN, LOGVAR_MAX)
        return cls(mean=mean, std=torch.exp(0.5 * logvar))


def sample_latent(spec: LatentSpec, batch_size: int, rng: torch.Generator) -> LatentBatch:
    """Draw a batch from the latent prior.

    Discrete codes are uniform over their categories, continuous codes i.i.d.
    Uniform(-1, 1), noise i.i.d. standard Gaussian. Deterministic given the
    generator state.
    """
    if batch_size < 1:
        raise ValueError(f"batch_size must be >= 1, got {batch_size}")
    cols = []
    onehots = []
    for n_cat in spec.discrete_codes:
        idx = torch.randint(n_cat, (batch_size,), generator=rng)
        cols.append(idx)
        onehots.append(torch.nn.functional.one_hot(idx, n_cat).float())
    discrete = (
        torch.stack(cols, dim=1) if cols else torch.zeros(batch_size, 0, dtype=torch.long)
    )
    onehot = torch.cat(onehots, dim=1) if onehots else torch.zeros(batch_size, 0)
    continuous = torch.rand(batch_size, spec.n_continuous, generator=rng) * 2.0 - 1.0
    noise = torch.randn(batch_size, spec.n_noise, generator=rng)
    return LatentBatch(discrete=discrete, discrete_onehot=onehot, continuous=continuous, noise=noise)


def reparameterize(post: GaussianPosterior, rng: torch.Generator) -> torch.Tensor:
    """Sample mean + std * eps with eps ~ N(0, I); differentiable in mean and std."""
    if post.mean.shape != post.std.shape:
        raise ValueError(f"mean/std shape mismatch: {tuple(post.mean.shape)} vs {tuple(post.std.shape)}")
    eps = torch.randn(post.mean.shape, generator=rng, dtype=post.mean.dtype)
    return post.mean + post.std * eps


def permute_dims(samples: torch.Tensor, rng: torch.Generator) -> torch.Tensor:
    """Independently shuffle every column of ``samples`` across the batch.

    Turns a batch of joint samples into approximate samples from the product
    of the per-dimension marginals: each column keeps its values (multiset
    preserved exactly) but row pairings are destroyed.
    """
    if samples.ndim != 2:
        raise ValueError(f"expected a 2-d sample matrix, got shape {tuple(samples.shape)}")
    n, d = samples.shape
    if n < 1:
        raise ValueError("batch size must be >= 1")
    if d == 0:
        return samples.clone()
    cols = [samples[torch.randperm(n, generator=rng), j] for j in range(d)]
    return torch.stack(cols, dim=1)
