"""Training objective: negative ELBO plus per-factor disentanglement terms.

Per target factor i the objective adds a match-pairing term (mean squared
difference of block-i codes over sample pairs sharing factor i) and a
classification term lam_pos * CE(positive probe) - lam_neg * CE(negative
probe), both probes evaluated with their parameters frozen. The probes
themselves are trained on detached codes by ``probe_update_loss``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import torch
import torch.nn.functional as F

from .errors import ConfigError, NonFiniteLossError
from .model import ProbeBank, VaeModel, reparameterize

_PROB_EPS = 1e-6


@dataclass(frozen=True)
class LossWeights:
    """lam_mp/lam_pos/lam_neg weight the match-pairing, positive-probe and
    negative-probe terms; beta scales the KL (beta > 1 gives the plain
    beta-VAE baseline once the other weights are zero)."""

    lam_mp: float = 100.0
    lam_pos: float = 100.0
    lam_neg: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        for name in ("lam_mp", "lam_pos", "lam_neg", "beta"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")

    def is_recommended_proposed(self) -> bool:
        return self.lam_mp == self.lam_pos and self.lam_neg in (1.0, 10.0)

    @classmethod
    def proposed(cls, lam: float = 100.0, lam_neg: float = 1.0) -> "LossWeights":
        return cls(lam_mp=lam, lam_pos=lam, lam_neg=lam_neg, beta=1.0)

    @classmethod
    def beta_vae(cls, beta: float) -> "LossWeights":
        return cls(lam_mp=0.0, lam_pos=0.0, lam_neg=0.0, beta=beta)

    def to_json(self) -> dict:
        return {
            "lam_mp": self.lam_mp,
            "lam_pos": self.lam_pos,
            "lam_neg": self.lam_neg,
            "beta": self.beta,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "LossWeights":
        return cls(**{k: float(v) for k, v in obj.items()})


@dataclass
class LossBreakdown:
    neg_elbo: float
    reconstruction: float
    kl: float
    mp: dict[str, float] = field(default_factory=dict)
    cl_pos: dict[str, float] = field(default_factory=dict)
    cl_neg: dict[str, float] = field(default_factory=dict)
    total: float = 0.0

    def recompute_total(self, weights: LossWeights) -> float:
        total = self.neg_elbo
        total += sum(weights.lam_mp * v for v in self.mp.values())
        total += sum(weights.lam_pos * v for v in self.cl_pos.values())
        total -= sum(weights.lam_neg * v for v in self.cl_neg.values())
        return total

    def as_row(self) -> dict[str, float]:
        row = {
            "neg_elbo": self.neg_elbo,
            "reconstruction": self.reconstruction,
            "kl": self.kl,
            "total": self.total,
        }
        for part, values in (("mp", self.mp), ("cl_pos", self.cl_pos), ("cl_neg", self.cl_neg)):
            for name, v in values.items():
                row[f"{part}_{name}"] = v
        return row


@dataclass
class FeedbackBatch:
    """One step's worth of feedback for a single target factor: a batch of
    match pairs plus a labeled batch for the probes."""

    factor: str
    pair_a: torch.Tensor  # (P, C, H, W)
    pair_b: torch.Tensor
    labeled_x: torch.Tensor | None = None  # (L, C, H, W)
    labeled_y: torch.Tensor | None = None  # (L,) long


def _check_finite(name: str, value: torch.Tensor) -> torch.Tensor:
    if not torch.isfinite(value).all():
        raise NonFiniteLossError(f"{name} is non-finite: {value}")
    return value


def kl_to_standard_normal(means: torch.Tensor, logvars: torch.Tensor) -> torch.Tensor:
    """Closed-form KL(q || N(0, I)) per sample, summed over dims."""
    return 0.5 * (means.pow(2) + logvars.exp() - 1.0 - logvars).sum(dim=1)


def neg_elbo(
    model: VaeModel,
    images: torch.Tensor,
    beta: float = 1.0,
    generator: torch.Generator | None = None,
    use_means: bool = False,
) -> tuple[torch.Tensor, dict[str, torch.Tensor]]:
    """-ELBO = reconstruction cross-entropy + beta * KL, averaged per sample.

    One Monte-Carlo sample of q(Z|X) estimates the reconstruction term.
    """
    means, logvars = model.encode(images)
    z = means if use_means else reparameterize(means, logvars, generator)
    probs = model.decode(z).clamp(_PROB_EPS, 1.0 - _PROB_EPS)
    recon = F.binary_cross_entropy(probs, images, reduction="none")
    recon = recon.reshape(recon.shape[0], -1).sum(dim=1).mean()
    kl = kl_to_standard_normal(means, logvars).mean()
    _check_finite("reconstruction", recon)
    _check_finite("kl", kl)
    total = recon + beta * kl
    return total, {"reconstruction": recon, "kl": kl}


def match_pairing_loss(
    model: VaeModel,
    x_a: torch.Tensor,
    x_b: torch.Tensor,
    factor: str,
    generator: torch.Generator | None = None,
    use_means: bool = False,
    shared_noise: bool = False,
    include_nuisance: bool = False,
) -> torch.Tensor:
    """Mean squared difference between block-i codes of paired samples.

    ``include_nuisance`` extends the pull to the nuisance block, for pairs
    whose members share their instance state (they differ only in declared
    target factors, so the nuisance code has nothing legitimate to change).
    """
    dims = list(model.partition.block_dims(factor))
    if include_nuisance:
        dims += list(model.partition.nuisance_dims)
    mean_a, logvar_a = model.encode(x_a)
    mean_b, logvar_b = model.encode(x_b)
    if use_means:
        z_a, z_b = mean_a, mean_b
    elif shared_noise:
        eps = torch.empty_like(mean_a).normal_(generator=generator)
        z_a = mean_a + torch.exp(0.5 * logvar_a) * eps
        z_b = mean_b + torch.exp(0.5 * logvar_b) * eps
    else:
        z_a = reparameterize(mean_a, logvar_a, generator)
        z_b = reparameterize(mean_b, logvar_b, generator)
    diff = z_a[:, dims] - z_b[:, dims]
    return _check_finite("match_pairing", diff.pow(2).sum(dim=1).mean())


def probe_cross_entropies(
    probes: ProbeBank,
    factor: str,
    z: torch.Tensor,
    labels: torch.Tensor,
    frozen: bool,
) -> tuple[torch.Tensor, torch.Tensor]:
    """(positive CE, capped negative CE) for one factor.

    The negative CE is capped at ln(cardinality) per sample: once the probe is
    at chance level there is nothing left for the encoder to exploit.
    """
    if z.shape[0] == 0:
        raise ConfigError("empty batch for probe cross-entropy")
    k = probes.cardinalities[factor]
    if labels.min() < 0 or labels.max() >= k:
        raise ConfigError(f"label out of range for factor {factor!r} (K={k})")
    pos = F.cross_entropy(probes.pos_logits(factor, z, frozen=frozen), labels)
    neg_per_sample = F.cross_entropy(
        probes.neg_logits(factor, z, frozen=frozen), labels, reduction="none"
    )
    neg = torch.minimum(neg_per_sample, neg_per_sample.new_tensor(math.log(k))).mean()
    return _check_finite("cl_pos", pos), _check_finite("cl_neg", neg)


def classification_loss(
    model: VaeModel,
    probes: ProbeBank,
    x: torch.Tensor,
    factor: str,
    labels: torch.Tensor,
    generator: torch.Generator | None = None,
    use_means: bool = False,
) -> tuple[torch.Tensor, torch.Tensor]:
    """Probe cross-entropies on codes sampled from q(Z|X), probes frozen."""
    means, logvars = model.encode(x)
    z = means if use_means else reparameterize(means, logvars, generator)
    return probe_cross_entropies(probes, factor, z, labels, frozen=True)


def probe_update_loss(
    probes: ProbeBank,
    z: torch.Tensor,
    factor: str,
    labels: torch.Tensor,
) -> torch.Tensor:
    """The probes' own objective on detached codes (positive + negative CE)."""
    if z.shape[0] == 0:
        raise ConfigError("empty batch for probe update")
    if z.requires_grad:
        raise ConfigError("probe update requires detached codes")
    k = probes.cardinalities[factor]
    if labels.min() < 0 or labels.max() >= k:
        raise ConfigError(f"label out of range for factor {factor!r} (K={k})")
    pos = F.cross_entropy(probes.pos_logits(factor, z), labels)
    neg = F.cross_entropy(probes.neg_logits(factor, z), labels)
    return _check_finite("probe_update", pos + neg)


def total_loss(
    model: VaeModel,
    probes: ProbeBank | None,
    images: torch.Tensor,
    feedback: dict[str, FeedbackBatch] | None,
    weights: LossWeights,
    generator: torch.Generator | None = None,
    use_means: bool = False,
    mp_include_nuisance: bool = False,
) -> tuple[torch.Tensor, LossBreakdown]:
    """Compose the full objective for one step.

    `images` is the reconstruction batch (the trainer concatenates the train
    batch with the feedback images, which augment the biased dataset).
    Feedback terms are only added for factors with a batch available; with no
    feedback at all the objective reduces to the negative ELBO.
    """
    elbo_term, parts = neg_elbo(model, images, weights.beta, generator, use_means)
    breakdown = LossBreakdown(
        neg_elbo=float(elbo_term.detach()),
        reconstruction=float(parts["reconstruction"].detach()),
        kl=float(parts["kl"].detach()),
    )
    total = elbo_term
    for factor, batch in (feedback or {}).items():
        mp = match_pairing_loss(
            model, batch.pair_a, batch.pair_b, factor, generator, use_means,
            include_nuisance=mp_include_nuisance,
        )
        total = total + weights.lam_mp * mp
        breakdown.mp[factor] = float(mp.detach())
        if batch.labeled_x is not None and batch.labeled_x.shape[0] > 0:
            if probes is None:
                raise ConfigError("labeled feedback given but no probes")
            pos, neg = classification_loss(
                model, probes, batch.labeled_x, factor, batch.labeled_y,
                generator, use_means,
            )
            total = total + weights.lam_pos * pos - weights.lam_neg * neg
            breakdown.cl_pos[factor] = float(pos.detach())
            breakdown.cl_neg[factor] = float(neg.detach())
    breakdown.total = float(total.detach())
    return total, breakdown
