"""Network definitions: generator, shared encoder with D and Q heads, TC discriminator."""

from __future__ import annotations

from dataclasses import dataclass, field

import torch
import torch.nn as nn

from .latent import GaussianPosterior, LatentSpec

# Registered image profiles as (channels, height, width).
PROFILES: dict[str, tuple[int, int, int]] = {
    "dsprites": (1, 64, 64),
    "synthetic": (1, 32, 32),
    "mnist": (1, 28, 28),
    "fashion_mnist": (1, 28, 28),
}


def profile_for_shape(shape: tuple[int, int, int]) -> str:
    """Map an image shape (C, H, W) back to a registered profile name."""
    for name, s in PROFILES.items():
        if s == tuple(shape):
            return name
    raise ValueError(f"no registered profile with image shape {tuple(shape)}")


@dataclass(frozen=True)
class ArchConfig:
    """Knobs for the concrete layer stacks; defaults follow small-DCGAN convention."""

    feature_dim: int = 128
    base_channels: int = 64
    tcd_width: int = 1000
    tcd_depth: int = 6
    init_std: float = 0.02

    def to_dict(self) -> dict:
        return {
            "feature_dim": self.feature_dim,
            "base_channels": self.base_channels,
            "tcd_width": self.tcd_width,
            "tcd_depth": self.tcd_depth,
            "init_std": self.init_std,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ArchConfig":
        return cls(**d)


def _init_weights(module: nn.Module, std: float):
    for m in module.modules():
        if isinstance(m, (nn.Conv2d, nn.ConvTranspose2d)):
            nn.init.normal_(m.weight, 0.0, std)
            if m.bias is not None:
                nn.init.zeros_(m.bias)
        elif isinstance(m, (nn.BatchNorm1d, nn.BatchNorm2d)):
            nn.init.normal_(m.weight, 1.0, std)
            nn.init.zeros_(m.bias)


class Generator(nn.Module):
    """Latent vector -> image in [-1, 1] (tanh output)."""

    def __init__(self, in_width: int, image_shape: tuple[int, int, int], arch: ArchConfig):
        super().__init__()
        if in_width < 1:
            raise ValueError("generator input width must be >= 1")
        c_out, h, _ = image_shape
        ch = arch.base_channels
        self.image_shape = tuple(image_shape)
        self.start = 7 if h == 28 else 4
        self.fc = nn.Sequential(
            nn.Linear(in_width, 128, bias=False),
            nn.BatchNorm1d(128),
            nn.ReLU(True),
            nn.Linear(128, ch * self.start * self.start, bias=False),
            nn.BatchNorm1d(ch * self.start * self.start),
            nn.ReLU(True),
        )
        self.ch = ch

        def up(cin, cout):
            return [nn.ConvTranspose2d(cin, cout, 4, 2, 1), nn.BatchNorm2d(cout), nn.ReLU(True)]

        if h == 64:
            blocks = up(ch, ch) + up(ch, ch // 2) + up(ch // 2, ch // 2)
            last = nn.ConvTranspose2d(ch // 2, c_out, 4, 2, 1)
        elif h == 32:
            blocks = up(ch, ch) + up(ch, ch // 2)
            last = nn.ConvTranspose2d(ch // 2, c_out, 4, 2, 1)
        elif h == 28:
            blocks = up(ch, ch // 2) + [nn.Conv2d(ch // 2, ch // 2, 3, 1, 1), nn.BatchNorm2d(ch // 2), nn.ReLU(True)]
            last = nn.ConvTranspose2d(ch // 2, c_out, 4, 2, 1)
        else:
            raise ValueError(f"unsupported image height {h}")
        self.deconv = nn.Sequential(*blocks, last, nn.Tanh())

    def forward(self, z: torch.Tensor) -> torch.Tensor:
        x = self.fc(z)
        x = x.view(-1, self.ch, self.start, self.start)
        return self.deconv(x)


class Encoder(nn.Module):
    """Image -> shared feature vector consumed by both the D and Q heads."""

    def __init__(self, image_shape: tuple[int, int, int], arch: ArchConfig):
        super().__init__()
        c_in, h, _ = image_shape
        ch = arch.base_channels

        def down(cin, cout, bn=True):
            layers = [nn.Conv2d(cin, cout, 4, 2, 1)]
            if bn:
                layers.append(nn.BatchNorm2d(cout))
            layers.append(nn.LeakyReLU(0.2, True))
            return layers

        if h == 64:
            blocks = down(c_in, ch // 2, bn=False) + down(ch // 2, ch) + down(ch, ch) + down(ch, ch)
            spatial = 4
        elif h == 32:
            blocks = down(c_in, ch // 2, bn=False) + down(ch // 2, ch) + down(ch, ch)
            spatial = 4
        elif h == 28:
            blocks = (
                down(c_in, ch // 2, bn=False)
                + down(ch // 2, ch)
                + [nn.Conv2d(ch, ch, 3, 1, 1), nn.BatchNorm2d(ch), nn.LeakyReLU(0.2, True)]
            )
            spatial = 7
        else:
            raise ValueError(f"unsupported image height {h}")
        self.conv = nn.Sequential(*blocks)
        self.fc = nn.Sequential(
            nn.Flatten(),
            nn.Linear(ch * spatial * spatial, arch.feature_dim),
            nn.LeakyReLU(0.2, True),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.fc(self.conv(x))


class DiscriminatorHead(nn.Module):
    """Feature vector -> one real-vs-fake logit per row."""

    def __init__(self, feature_dim: int):
        super().__init__()
        self.fc = nn.Linear(feature_dim, 1)

    def forward(self, feats: torch.Tensor) -> torch.Tensor:
        return self.fc(feats).squeeze(1)


class QHead(nn.Module):
    """Feature vector -> (Gaussian posterior over continuous codes, per-code logits)."""

    def __init__(self, feature_dim: int, spec: LatentSpec):
        super().__init__()
        self.spec = spec
        self.hidden = nn.Sequential(nn.Linear(feature_dim, feature_dim), nn.LeakyReLU(0.2, True))
        self.cont = nn.Linear(feature_dim, 2 * spec.n_continuous) if spec.n_continuous else None
        self.disc = nn.ModuleList(nn.Linear(feature_dim, c) for c in spec.discrete_codes)

    def forward(self, feats: torch.Tensor) -> tuple[GaussianPosterior, list[torch.Tensor]]:
        h = self.hidden(feats)
        n = self.spec.n_continuous
        if self.cont is not None:
            out = self.cont(h)
            post = GaussianPosterior.from_logvar(out[:, :n], out[:, n:])
        else:
            empty = feats.new_zeros(feats.shape[0], 0)
            post = GaussianPosterior(mean=empty, std=empty)
        return post, [head(h) for head in self.disc]


class TCDiscriminator(nn.Module):
    """Code sample matrix -> joint-vs-product logit per row (density-ratio classifier)."""

    def __init__(self, in_width: int, arch: ArchConfig):
        super().__init__()
        layers: list[nn.Module] = []
        d = in_width
        for _ in range(arch.tcd_depth):
            layers += [nn.Linear(d, arch.tcd_width), nn.LeakyReLU(0.2, True)]
            d = arch.tcd_width
        layers.append(nn.Linear(d, 1))
        self.mlp = nn.Sequential(*layers)
        self.in_width = in_width

    def forward(self, samples: torch.Tensor) -> torch.Tensor:
        if samples.ndim != 2 or samples.shape[1] != self.in_width:
            raise ValueError(
                f"expected samples of shape [batch, {self.in_width}], got {tuple(samples.shape)}"
            )
        return self.mlp(samples).squeeze(1)


@dataclass
class NetworkBundle:
    """The four trainable components plus the static description they were built for."""

    generator: Generator
    encoder: Encoder
    disc_head: DiscriminatorHead
    q_head: QHead
    tcd: TCDiscriminator
    spec: LatentSpec
    profile: str
    arch: ArchConfig = field(default_factory=ArchConfig)

    def modules(self) -> dict[str, nn.Module]:
        return {
            "generator": self.generator,
            "encoder": self.encoder,
            "disc_head": self.disc_head,
            "q_head": self.q_head,
            "tcd": self.tcd,
        }

    def train(self):
        for m in self.modules().values():
            m.train()

    def eval(self):
        for m in self.modules().values():
            m.eval()

    def discriminator_logits(self, images: torch.Tensor) -> torch.Tensor:
        return self.disc_head(self.encoder(images))

    def q_posterior(self, images: torch.Tensor) -> tuple[GaussianPosterior, list[torch.Tensor]]:
        return self.q_head(self.encoder(images))


def build_networks(
    spec: LatentSpec,
    dataset_profile: str,
    arch_config: ArchConfig | None = None,
    seed: int | None = None,
) -> NetworkBundle:
    """Instantiate all four networks for a latent spec and image profile.

    Conv/deconv weights start from N(0, init_std); dense layers keep the
    default fan-based initialization. Passing ``seed`` makes the
    initialization reproducible.
    """
    if dataset_profile not in PROFILES:
        raise ValueError(f"unknown dataset profile {dataset_profile!r}; known: {sorted(PROFILES)}")
    arch = arch_config or ArchConfig()
    if seed is not None:
        torch.manual_seed(seed)
    shape = PROFILES[dataset_profile]
    gen = Generator(spec.input_width, shape, arch)
    enc = Encoder(shape, arch)
    bundle = NetworkBundle(
        generator=gen,
        encoder=enc,
        disc_head=DiscriminatorHead(arch.feature_dim),
        q_head=QHead(arch.feature_dim, spec),
        tcd=TCDiscriminator(spec.n_continuous, arch),
        spec=spec,
        profile=dataset_profile,
        arch=arch,
    )
    for m in bundle.modules().values():
        _init_weights(m, arch.init_std)
    return bundle


def tc_discriminator_forward(bundle: NetworkBundle, samples: torch.Tensor) -> torch.Tensor:
    """Run the TC discriminator; one unbounded logit per row."""
    return bundle.tcd(samples)
