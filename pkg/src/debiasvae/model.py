"""Convolutional VAE with a partitioned latent code, plus linear latent probes.

The latent code is split into one block per target factor and a nuisance
block. Probes are linear classifiers predicting a factor from its block
(positive probe) and from everything outside its block (negative probe).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F
from torch import nn

from .arrayio import load_arrays, save_arrays
from .errors import CheckpointVersionError, ConfigError
from .factors import FactorSpec

CHECKPOINT_VERSION = "debiasvae.ckpt.v1"
LOGVAR_CLAMP = 8.0


@dataclass(frozen=True)
class LatentPartition:
    """Assignment of latent dims to one contiguous block per target factor;
    the remaining dims form the nuisance block."""

    total_dims: int
    blocks: tuple[tuple[str, tuple[int, int]], ...]

    def __post_init__(self):
        if self.total_dims < len(self.blocks):
            raise ConfigError("need at least as many latent dims as target factors")
        used = []
        for name, (lo, hi) in self.blocks:
            if not (0 <= lo < hi <= self.total_dims):
                raise ConfigError(f"block {name!r} range ({lo},{hi}) out of [0,{self.total_dims})")
            used.extend(range(lo, hi))
        if len(set(used)) != len(used):
            raise ConfigError("latent blocks overlap")

    @property
    def block_names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.blocks)

    @property
    def nuisance_dims(self) -> tuple[int, ...]:
        used = {d for _, (lo, hi) in self.blocks for d in range(lo, hi)}
        return tuple(d for d in range(self.total_dims) if d not in used)

    def block_range(self, name: str) -> tuple[int, int]:
        for bname, rng in self.blocks:
            if bname == name:
                return rng
        raise ConfigError(f"no latent block for factor {name!r}")

    def block_dims(self, name: str) -> tuple[int, ...]:
        lo, hi = self.block_range(name)
        return tuple(range(lo, hi))

    def complement_dims(self, name: str) -> tuple[int, ...]:
        block = set(self.block_dims(name))
        return tuple(d for d in range(self.total_dims) if d not in block)

    def split(self, z):
        """Slice z (..., m) into {factor: block, "nuisance": rest}."""
        parts = {name: z[..., lo:hi] for name, (lo, hi) in self.blocks}
        nd = list(self.nuisance_dims)
        parts["nuisance"] = z[..., nd] if isinstance(z, np.ndarray) else z[..., nd]
        return parts

    def concat(self, parts) -> torch.Tensor:
        """Reassemble z from `split` output, restoring dim order exactly."""
        first = next(iter(parts.values()))
        shape = first.shape[:-1] + (self.total_dims,)
        if isinstance(first, np.ndarray):
            out = np.empty(shape, dtype=first.dtype)
        else:
            out = first.new_empty(shape)
        for name, (lo, hi) in self.blocks:
            out[..., lo:hi] = parts[name]
        for j, d in enumerate(self.nuisance_dims):
            out[..., d] = parts["nuisance"][..., j]
        return out

    def to_json(self) -> dict:
        return {
            "total_dims": self.total_dims,
            "blocks": [[name, list(rng)] for name, rng in self.blocks],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "LatentPartition":
        return cls(
            total_dims=int(obj["total_dims"]),
            blocks=tuple((name, (int(lo), int(hi))) for name, (lo, hi) in obj["blocks"]),
        )


@dataclass(frozen=True)
class ModelConfig:
    family: str
    image_dims: tuple[int, int, int]
    latent_dims: int
    conv_channels: tuple[int, int, int, int] = (16, 32, 32, 32)
    fc_width: int = 256
    dims_per_factor: int = 4

    def to_json(self) -> dict:
        return {
            "family": self.family,
            "image_dims": list(self.image_dims),
            "latent_dims": self.latent_dims,
            "conv_channels": list(self.conv_channels),
            "fc_width": self.fc_width,
            "dims_per_factor": self.dims_per_factor,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ModelConfig":
        return cls(
            family=obj["family"],
            image_dims=tuple(obj["image_dims"]),
            latent_dims=int(obj["latent_dims"]),
            conv_channels=tuple(obj["conv_channels"]),
            fc_width=int(obj["fc_width"]),
            dims_per_factor=int(obj["dims_per_factor"]),
        )


_LATENT_PRESETS = {"glyphs10": 16, "sprites": 20, "scene": 50}


def model_config_for(family: str, spec: FactorSpec | None = None) -> ModelConfig:
    if family not in _LATENT_PRESETS:
        raise ConfigError(f"no model preset for family {family!r}")
    dims = {"glyphs10": (28, 28, 3)}.get(family, (64, 64, 3))
    return ModelConfig(family=family, image_dims=dims, latent_dims=_LATENT_PRESETS[family])


def partition_for(spec: FactorSpec, latent_dims: int, dims_per_factor: int = 4) -> LatentPartition:
    """Contiguous 4-dim block per target factor (in spec order), nuisance rest."""
    blocks = []
    lo = 0
    for name in spec.target_names:
        blocks.append((name, (lo, lo + dims_per_factor)))
        lo += dims_per_factor
    if lo > latent_dims:
        raise ConfigError(
            f"{len(spec.target_names)} blocks of {dims_per_factor} dims exceed m={latent_dims}"
        )
    return LatentPartition(total_dims=latent_dims, blocks=tuple(blocks))


def _conv_plan(side: int):
    # (kernel, stride, padding, output_padding-for-mirror) per layer, and the
    # spatial side after the encoder stack.
    if side == 28:
        return [(4, 2, 1, 0), (4, 2, 1, 0), (4, 2, 1, 1), (3, 1, 1, 0)], 3
    if side == 64:
        return [(4, 2, 1, 0), (4, 2, 1, 0), (4, 2, 1, 0), (4, 2, 1, 0)], 4
    raise ConfigError(f"unsupported image side {side}; families use 28 or 64")


class VaeModel(nn.Module):
    """Gaussian-posterior conv VAE over a partitioned latent code."""

    def __init__(self, config: ModelConfig, partition: LatentPartition):
        super().__init__()
        if partition.total_dims != config.latent_dims:
            raise ConfigError("partition dims disagree with model config")
        self.config = config
        self.partition = partition
        self.version = CHECKPOINT_VERSION
        h, w, c = config.image_dims
        if h != w:
            raise ConfigError("images must be square")
        plan, self.spatial = _conv_plan(h)
        chans = config.conv_channels
        m = config.latent_dims

        enc_layers: list[nn.Module] = []
        in_ch = c
        for (k, s, p, _), out_ch in zip(plan, chans):
            enc_layers += [nn.Conv2d(in_ch, out_ch, k, s, p), nn.ReLU()]
            in_ch = out_ch
        self.enc_conv = nn.Sequential(*enc_layers)
        flat = chans[-1] * self.spatial * self.spatial
        self.enc_fc = nn.Sequential(
            nn.Flatten(), nn.Linear(flat, config.fc_width), nn.ReLU(),
            nn.Linear(config.fc_width, 2 * m),
        )
        self.dec_fc = nn.Sequential(
            nn.Linear(m, config.fc_width), nn.ReLU(),
            nn.Linear(config.fc_width, flat), nn.ReLU(),
        )
        dec_layers: list[nn.Module] = []
        rev = list(zip(plan, chans))[::-1]
        for i, ((k, s, p, op), out_ch) in enumerate(rev):
            in_ch = out_ch
            tgt_ch = rev[i + 1][1] if i + 1 < len(rev) else c
            dec_layers.append(nn.ConvTranspose2d(in_ch, tgt_ch, k, s, p, output_padding=op))
            if i + 1 < len(rev):
                dec_layers.append(nn.ReLU())
        self.dec_conv = nn.Sequential(*dec_layers)

    def encode(self, images: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """images: (B, C, H, W) float in [0,1] -> (means, logvars), each (B, m)."""
        h, w, c = self.config.image_dims
        if images.dim() != 4 or images.shape[1:] != (c, h, w):
            raise ConfigError(
                f"encode expects (B,{c},{h},{w}), got {tuple(images.shape)}"
            )
        out = self.enc_fc(self.enc_conv(images))
        means, logvars = out.chunk(2, dim=1)
        return means, logvars.clamp(-LOGVAR_CLAMP, LOGVAR_CLAMP)

    def decode(self, z: torch.Tensor) -> torch.Tensor:
        """z: (B, m) -> per-pixel success probabilities (B, C, H, W) in (0,1)."""
        if z.dim() != 2 or z.shape[1] != self.config.latent_dims:
            raise ConfigError(
                f"decode expects (B,{self.config.latent_dims}), got {tuple(z.shape)}"
            )
        h = self.dec_fc(z)
        h = h.view(-1, self.config.conv_channels[-1], self.spatial, self.spatial)
        return torch.sigmoid(self.dec_conv(h))

    def forward(self, images, generator=None):
        means, logvars = self.encode(images)
        z = reparameterize(means, logvars, generator)
        return self.decode(z), means, logvars, z


def reparameterize(means: torch.Tensor, logvars: torch.Tensor, generator=None) -> torch.Tensor:
    if means.shape != logvars.shape:
        raise ConfigError(f"shape mismatch {tuple(means.shape)} vs {tuple(logvars.shape)}")
    eps = torch.empty_like(means).normal_(generator=generator)
    return means + torch.exp(0.5 * logvars) * eps


def images_to_tensor(images: np.ndarray) -> torch.Tensor:
    """u8 (N, H, W, C) -> float32 (N, C, H, W) in [0, 1]."""
    arr = np.asarray(images)
    if arr.ndim == 3:
        arr = arr[None]
    return torch.from_numpy(arr.astype(np.float32) / 255.0).permute(0, 3, 1, 2).contiguous()


def tensor_to_images(probs: torch.Tensor) -> np.ndarray:
    """float (N, C, H, W) in [0,1] -> u8 (N, H, W, C)."""
    arr = probs.detach().permute(0, 2, 3, 1).cpu().numpy()
    return np.clip(np.rint(arr * 255.0), 0, 255).astype(np.uint8)


class ProbeBank(nn.Module):
    """Per target factor: positive probe on its block, negative probe on the
    complement. Both are linear softmax classifiers."""

    def __init__(self, partition: LatentPartition, cardinalities: dict[str, int]):
        super().__init__()
        self.partition = partition
        self.cardinalities = dict(cardinalities)
        pos, neg = {}, {}
        m = partition.total_dims
        for name in partition.block_names:
            k = self.cardinalities[name]
            block = len(partition.block_dims(name))
            pos[name] = nn.Linear(block, k)
            neg[name] = nn.Linear(m - block, k)
        self.pos = nn.ModuleDict(pos)
        self.neg = nn.ModuleDict(neg)

    def _logits(self, layer: nn.Linear, x: torch.Tensor, frozen: bool) -> torch.Tensor:
        if frozen:
            return F.linear(x, layer.weight.detach(), layer.bias.detach())
        return layer(x)

    def pos_logits(self, name: str, z: torch.Tensor, frozen: bool = False) -> torch.Tensor:
        dims = list(self.partition.block_dims(name))
        return self._logits(self.pos[name], z[:, dims], frozen)

    def neg_logits(self, name: str, z: torch.Tensor, frozen: bool = False) -> torch.Tensor:
        dims = list(self.partition.complement_dims(name))
        return self._logits(self.neg[name], z[:, dims], frozen)


def build_model(config: ModelConfig, spec: FactorSpec, seed: int) -> tuple[VaeModel, ProbeBank]:
    """Seeded construction: identical seed gives identical initial parameters."""
    torch.manual_seed(seed)
    partition = partition_for(spec, config.latent_dims, config.dims_per_factor)
    model = VaeModel(config, partition)
    cards = {name: spec.cardinality(name) for name in spec.target_names}
    probes = ProbeBank(partition, cards)
    return model, probes


def _state_arrays(module: nn.Module, prefix: str) -> dict[str, np.ndarray]:
    return {
        f"{prefix}.{k}": v.detach().cpu().numpy()
        for k, v in module.state_dict().items()
    }


def _optimizer_arrays(opt: torch.optim.Optimizer, prefix: str) -> dict[str, np.ndarray]:
    out = {}
    for idx, state in opt.state_dict()["state"].items():
        for key, val in state.items():
            if isinstance(val, torch.Tensor):
                arr = val.detach().cpu().numpy()
            else:
                arr = np.asarray(float(val))
            out[f"{prefix}.{idx}.{key}"] = arr
    return out


def save_checkpoint(
    path,
    model: VaeModel,
    probes: ProbeBank,
    optimizers: dict[str, torch.optim.Optimizer] | None = None,
    counters: dict | None = None,
    train_config: dict | None = None,
):
    """Full-fidelity checkpoint: parameters, probe parameters, optimizer
    state, and the counters that define the (stateless) rng schedule."""
    arrays = {}
    arrays.update(_state_arrays(model, "model"))
    arrays.update(_state_arrays(probes, "probes"))
    for tag, opt in (optimizers or {}).items():
        arrays.update(_optimizer_arrays(opt, f"opt_{tag}"))
    meta = {
        "version": CHECKPOINT_VERSION,
        "model_config": model.config.to_json(),
        "partition": model.partition.to_json(),
        "cardinalities": probes.cardinalities,
        "counters": counters or {},
        "train_config": train_config,
    }
    return save_arrays(path, arrays, meta)


@dataclass
class Checkpoint:
    model_config: ModelConfig
    partition: LatentPartition
    cardinalities: dict[str, int]
    counters: dict
    train_config: dict | None
    arrays: dict[str, np.ndarray]

    def build_model(self) -> VaeModel:
        model = VaeModel(self.model_config, self.partition)
        state = {
            k[len("model.") :]: torch.from_numpy(v.copy())
            for k, v in self.arrays.items()
            if k.startswith("model.")
        }
        model.load_state_dict(state)
        return model

    def build_probes(self) -> ProbeBank:
        probes = ProbeBank(self.partition, self.cardinalities)
        state = {
            k[len("probes.") :]: torch.from_numpy(v.copy())
            for k, v in self.arrays.items()
            if k.startswith("probes.")
        }
        probes.load_state_dict(state)
        return probes

    def restore_optimizer(self, opt: torch.optim.Optimizer, tag: str) -> None:
        prefix = f"opt_{tag}."
        state: dict[int, dict] = {}
        for key, arr in self.arrays.items():
            if not key.startswith(prefix):
                continue
            _, idx, name = key.rsplit(".", 2)
            entry = state.setdefault(int(idx), {})
            if arr.ndim == 0:
                entry[name] = torch.tensor(float(arr))
            else:
                entry[name] = torch.from_numpy(arr.copy())
        sd = opt.state_dict()
        opt.load_state_dict({"state": state, "param_groups": sd["param_groups"]})


def load_checkpoint(path) -> Checkpoint:
    arrays, meta = load_arrays(path)
    version = meta.get("version")
    if version != CHECKPOINT_VERSION:
        raise CheckpointVersionError(
            f"checkpoint version {version!r} != supported {CHECKPOINT_VERSION!r}"
        )
    return Checkpoint(
        model_config=ModelConfig.from_json(meta["model_config"]),
        partition=LatentPartition.from_json(meta["partition"]),
        cardinalities={k: int(v) for k, v in meta["cardinalities"].items()},
        counters=meta.get("counters", {}),
        train_config=meta.get("train_config"),
        arrays=arrays,
    )
