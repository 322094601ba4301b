"""Training loop (TTUR, 4:1 update ratio, plateau schedule) and inference."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .config import ModelConfig, TrainConfig
from .errors import ConfigError, DataError, TrainingDiverged
from .io import Archive, load_archive, write_rec
from .losses import discriminator_loss, generator_adversarial_loss, pearson_loss
from .models import Generator, build_models

__all__ = [
    "TrainedPrior", "train", "refine", "save_prior", "load_prior",
    "sweep_adversarial_weight",
]


@dataclass
class TrainedPrior:
    state_dict: dict
    model_config: ModelConfig
    provenance: dict = field(default_factory=dict)

    @property
    def condition_hash(self) -> str:
        return self.provenance.get("condition_hash", "")

    def generator(self) -> Generator:
        dims = tuple(self.provenance.get("dims", (16, 16, 8)))
        gen = Generator(self.model_config, dims)
        gen.load_state_dict(self.state_dict)
        gen.eval()
        return gen


def save_prior(prior: TrainedPrior, path: Path | str) -> None:
    torch.save({
        "state_dict": prior.state_dict,
        "model_config": prior.model_config.to_dict(),
        "provenance": prior.provenance,
    }, path)


def load_prior(path: Path | str) -> TrainedPrior:
    blob = torch.load(path, map_location="cpu", weights_only=False)
    return TrainedPrior(
        state_dict=blob["state_dict"],
        model_config=ModelConfig(**blob["model_config"]),
        provenance=blob["provenance"],
    )


def _to_tensors(pairs) -> tuple[torch.Tensor, torch.Tensor]:
    x = torch.from_numpy(np.stack([p.approximant for p in pairs])).float().unsqueeze(1)
    y = torch.from_numpy(np.stack([p.ground_truth for p in pairs])).float().unsqueeze(1)
    return x, y


def train(model_cfg: ModelConfig, train_cfg: TrainConfig,
          archive: Archive | Path | str) -> TrainedPrior:
    """Alternating adversarial training on the archive's training split.

    The last 10% of the training pairs are held out for validation; the
    validation loss (negative Pearson correlation) drives the plateau
    schedule: halve both step sizes after `plateau_patience_halve` epochs
    without improvement, stop after `plateau_patience_stop`, at the minimum
    step size, or at `max_epochs`.
    """
    if not isinstance(archive, Archive):
        archive = load_archive(archive)
    pairs = archive.split("train")
    if len(pairs) < 2:
        raise DataError("need at least 2 training pairs")
    n_val = max(1, len(pairs) // 10)
    train_pairs, val_pairs = pairs[:-n_val], pairs[-n_val:]
    x_train, y_train = _to_tensors(train_pairs)
    x_val, y_val = _to_tensors(val_pairs)

    torch.manual_seed(train_cfg.seed)
    generator, discriminator = build_models(model_cfg, tuple(archive.dims))
    opt_g = torch.optim.Adam(generator.parameters(), lr=train_cfg.generator_lr,
                             betas=(train_cfg.beta1, train_cfg.beta2))
    opt_d = torch.optim.Adam(discriminator.parameters(), lr=train_cfg.discriminator_lr,
                             betas=(train_cfg.beta1, train_cfg.beta2))

    lam = model_cfg.adversarial_weight
    ratio = train_cfg.generator_updates_per_discriminator_update
    curves = {"train_loss": [], "val_loss": []}
    counters = {"generator_updates": 0, "discriminator_updates": 0}
    best_val = math.inf
    epochs_since_best = 0
    rng = torch.Generator().manual_seed(train_cfg.seed)
    stop_reason = "max_epochs"
    epochs_run = 0

    def cond_input(x):
        return x if model_cfg.conditional_discriminator else None

    for epoch in range(train_cfg.max_epochs):
        generator.train()
        order = torch.randperm(x_train.shape[0], generator=rng)
        epoch_losses = []
        for start in range(0, len(order), train_cfg.batch_size):
            idx = order[start:start + train_cfg.batch_size]
            xb, yb = x_train[idx], y_train[idx]

            opt_g.zero_grad()
            out = generator(xb)
            loss = pearson_loss(out, yb)
            if lam > 0:
                loss = loss + lam * generator_adversarial_loss(
                    discriminator(out, cond_input(xb))
                )
            if not torch.isfinite(loss):
                raise TrainingDiverged(
                    f"non-finite generator loss at epoch {epoch}", curves
                )
            loss.backward()
            opt_g.step()
            counters["generator_updates"] += 1
            epoch_losses.append(float(loss.detach()))

            # the discriminator takes one step for every `ratio` generator
            # steps, each on the freshest batch
            if lam > 0 and counters["generator_updates"] % ratio == 0:
                opt_d.zero_grad()
                with torch.no_grad():
                    fake = generator(xb)
                d_loss = discriminator_loss(
                    discriminator(yb, cond_input(xb)),
                    discriminator(fake, cond_input(xb)),
                )
                if not torch.isfinite(d_loss):
                    raise TrainingDiverged(
                        f"non-finite discriminator loss at epoch {epoch}", curves
                    )
                d_loss.backward()
                opt_d.step()
                counters["discriminator_updates"] += 1

        generator.eval()
        with torch.no_grad():
            val_loss = float(pearson_loss(generator(x_val), y_val))
        curves["train_loss"].append(float(np.mean(epoch_losses)))
        curves["val_loss"].append(val_loss)
        epochs_run = epoch + 1

        if val_loss < best_val - 1e-5:
            best_val = val_loss
            epochs_since_best = 0
        else:
            epochs_since_best += 1
            if epochs_since_best >= train_cfg.plateau_patience_stop:
                stop_reason = "plateau"
                break
            if epochs_since_best % train_cfg.plateau_patience_halve == 0:
                for opt in (opt_g, opt_d):
                    for group in opt.param_groups:
                        group["lr"] = max(group["lr"] / 2, train_cfg.min_lr)
                if opt_g.param_groups[0]["lr"] <= train_cfg.min_lr:
                    stop_reason = "min_lr"
                    break

    return TrainedPrior(
        state_dict={k: v.detach().clone() for k, v in generator.state_dict().items()},
        model_config=model_cfg,
        provenance={
            "condition_hash": archive.condition_hash,
            "dims": list(archive.dims),
            "variant": model_cfg.variant,
            "epochs_run": epochs_run,
            "stop_reason": stop_reason,
            "best_val_loss": best_val,
            "curves": curves,
            "update_counters": counters,
            "n_train": len(train_pairs),
            "n_val": len(val_pairs),
            "train_config": train_cfg.to_dict(),
            "model_config": model_cfg.to_dict(),
        },
    )


def sweep_adversarial_weight(
    model_cfg: ModelConfig,
    train_cfg: TrainConfig,
    archive: Archive | Path | str,
    weights: tuple[float, ...] = (0.0, 0.001, 0.01, 0.1),
) -> dict[float, TrainedPrior]:
    """Train one prior per adversarial weight, all else held fixed.

    Returns {weight: TrainedPrior}; compare `best_val_loss` in the
    provenance to pick a weight for a given archive.
    """
    if not isinstance(archive, Archive):
        archive = load_archive(archive)
    results = {}
    for weight in weights:
        cfg = ModelConfig(**{**model_cfg.to_dict(), "adversarial_weight": weight})
        results[weight] = train(cfg, train_cfg, archive)
    return results


def refine(prior: TrainedPrior, archive: Archive | Path | str, dest: Path | str,
           split: str = "test", batch_size: int = 32) -> list[Path]:
    """Apply the trained generator and write r<idx>.rec files plus an index."""
    if not isinstance(archive, Archive):
        archive = load_archive(archive)
    if prior.condition_hash and archive.condition_hash and \
            prior.condition_hash != archive.condition_hash:
        raise ConfigError(
            f"prior was trained on condition {prior.condition_hash}, "
            f"archive is {archive.condition_hash}"
        )
    pairs = archive.pairs if split == "all" else archive.split(split)
    if not pairs:
        raise DataError(f"archive has no pairs in split {split!r}")
    dest = Path(dest)
    dest.mkdir(parents=True, exist_ok=True)
    generator = prior.generator()
    written = []
    with torch.no_grad():
        for start in range(0, len(pairs), batch_size):
            chunk = pairs[start:start + batch_size]
            x, _ = _to_tensors(chunk)
            out = generator(x).squeeze(1).numpy()
            for pair, values in zip(chunk, out):
                path = dest / f"r{pair.index:06d}.rec"
                write_rec(path, values)
                written.append(path)
    index = {
        "condition_hash": archive.condition_hash,
        "variant": prior.model_config.variant,
        "refined": [p.name for p in written],
        "training_report": {
            k: v for k, v in prior.provenance.items() if k != "curves"
        },
    }
    (dest / "index.json").write_text(json.dumps(index, indent=2, sort_keys=True) + "\n")
    return written
