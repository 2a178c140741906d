"""Command-line surface tying anchors, training, attacks, and evaluation
into reproducible experiments.

Exit codes: 0 success, 1 usage error, 2 data error. Every report embeds the
fully resolved numeric settings that produced it.
"""

from __future__ import annotations

import json
import sys
from dataclasses import asdict

import click
import numpy as np

from . import evaluation, geometry, io, training
from .attacks import AttackConfig, attack_preset, attack_presets
from .numerics import FeatureEncoder, NumericsError
from .objectives import LossKind


def _loss_from_dict(d: dict | None) -> LossKind:
    if not d:
        return LossKind.ace()
    return LossKind(
        kind=d.get("kind", "ace"),
        tau=float(d.get("tau", 1.0)),
        kappa=float(d.get("kappa", 0.0)),
        lambda_inv=float(d.get("lambda_inv", 6.0)),
    )


def _attack_from_dict(d: dict | None, default_preset: str = "pgd-train") -> AttackConfig:
    if not d:
        return attack_preset(default_preset)
    if "preset" in d:
        base = attack_preset(d["preset"])
        d = {k: v for k, v in d.items() if k != "preset"}
    else:
        base = attack_preset(default_preset)
    return AttackConfig(
        epsilon=float(d.get("epsilon", base.epsilon)),
        steps=int(d.get("steps", base.steps)),
        step_size=float(d.get("step_size", base.step_size)),
        loss=_loss_from_dict(d.get("loss")) if "loss" in d else base.loss,
        random_start=bool(d.get("random_start", base.random_start)),
    )


def _attack_to_dict(cfg: AttackConfig) -> dict:
    return {
        "epsilon": cfg.epsilon,
        "steps": cfg.steps,
        "step_size": cfg.step_size,
        "random_start": cfg.random_start,
        "loss": asdict(cfg.loss),
    }


def _echo_json(doc, out_path=None):
    text = json.dumps(doc, indent=2, sort_keys=True)
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    click.echo(text)


@click.group()
def cli():
    """Anchor-based adversarial training toolkit."""


@cli.group()
def anchors():
    """Inspect, generate, and remap anchor files."""


@anchors.command("stats")
@click.argument("file", type=click.Path(exists=True, dir_okay=False))
@click.option("--json", "as_json", is_flag=True, help="Emit machine-readable JSON.")
def anchors_stats(file, as_json):
    """Pairwise cosine statistics of an anchor file."""
    loaded = io.load_anchor_file(file)
    stats = geometry.compute_cos_stats(loaded.anchors)
    doc = {
        "file": str(file),
        "num_anchors": loaded.anchors.num_anchors,
        "dim": loaded.anchors.dim,
        "source": loaded.anchors.source,
        "expanded": loaded.expanded,
        "mean_offdiag_cos": stats.mean_offdiag_cos,
        "max_offdiag_cos": stats.max_offdiag_cos,
        "min_offdiag_cos": stats.min_offdiag_cos,
    }
    if as_json:
        _echo_json(doc)
        return
    click.echo(f"anchors:  {doc['num_anchors']}  (dim {doc['dim']})")
    click.echo(f"source:   {doc['source']}  expanded: {doc['expanded']}")
    click.echo(f"mean CoS: {stats.mean_offdiag_cos:+.4f}")
    click.echo(f"max CoS:  {stats.max_offdiag_cos:+.4f}")
    click.echo(f"min CoS:  {stats.min_offdiag_cos:+.4f}")


@anchors.command("expand")
@click.argument("infile", type=click.Path(exists=True, dir_okay=False))
@click.argument("outfile", type=click.Path(dir_okay=False))
@click.option("--fit-on", type=click.Path(exists=True, dir_okay=False),
              help="Fit the remap on this anchor file instead of INFILE.")
def anchors_expand(infile, outfile, fit_on):
    """Fit the polar-angle remap and write the remapped anchors."""
    loaded = io.load_anchor_file(infile)
    fit_set = io.load_anchor_file(fit_on).anchors if fit_on else loaded.anchors
    model = geometry.fit_expansion(fit_set)
    if fit_on:
        out = geometry.AnchorSet(
            labels=list(loaded.anchors.labels),
            vectors=np.stack([
                geometry.expand_novel(v, model) for v in loaded.anchors.vectors
            ]),
            source=f"expanded({loaded.anchors.source})",
        )
    else:
        out = geometry.expand(loaded.anchors, model)
    io.save_anchor_file(outfile, out, prompt=loaded.prompt, expansion=model,
                        expanded=True)
    stats = geometry.compute_cos_stats(out)
    click.echo(
        f"wrote {outfile}: {out.num_anchors} anchors, "
        f"mean CoS {stats.mean_offdiag_cos:+.4f} "
        f"(phi0 {model.phi0:.4f} rad)"
    )


@anchors.command("mmc")
@click.argument("outfile", type=click.Path(dir_okay=False))
@click.option("--classes", required=True, type=int, help="Number of anchors N.")
@click.option("--dim", required=True, type=int, help="Embedding dimension.")
def anchors_mmc(outfile, classes, dim):
    """Write regular-simplex anchors with pairwise cosine -1/(N-1)."""
    anchor_set = geometry.generate_mmc_anchors(classes, dim)
    io.save_anchor_file(outfile, anchor_set)
    click.echo(f"wrote {outfile}: {classes} simplex anchors in dim {dim}")


@anchors.command("ranks")
@click.argument("file", type=click.Path(exists=True, dir_okay=False))
@click.option("--groups", required=True, type=click.Path(exists=True, dir_okay=False),
              help="Label-to-supercategory map (JSON or text).")
@click.option("--json", "as_json", is_flag=True)
def anchors_ranks(file, groups, as_json):
    """Semantic-consistency rank metrics over super-categories."""
    loaded = io.load_anchor_file(file)
    mapping = io.load_group_map(groups)
    metrics = evaluation.rank_metrics(loaded.anchors, mapping)
    doc = {
        "file": str(file),
        "sum_of_ranks": metrics.sum_of_ranks,
        "top5_ratio": metrics.top5_ratio,
        "per_supercategory": metrics.per_supercategory,
    }
    if as_json:
        _echo_json(doc)
        return
    click.echo(f"average sum of ranks: {metrics.sum_of_ranks:.2f}")
    click.echo(f"average top-5 ratio:  {metrics.top5_ratio:.3f}")
    for name, entry in metrics.per_supercategory.items():
        click.echo(
            f"  {name}: sum {entry['sum_of_ranks']}, "
            f"top-5 {entry['top5_ratio']:.2f}"
        )


@cli.command("synth-data")
@click.option("--classes", required=True, type=int)
@click.option("--dim", required=True, type=int)
@click.option("--spread", required=True, type=float)
@click.option("--seed", default=0, type=int, show_default=True)
@click.option("--samples-per-class", default=100, type=int, show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
def synth_data(classes, dim, spread, seed, samples_per_class, out):
    """Generate a Gaussian-blob dataset and save it as .npz."""
    ds = training.make_synthetic_dataset(classes, dim, samples_per_class, spread, seed)
    io.save_dataset(out, ds)
    click.echo(
        f"wrote {out}: {classes} classes, dim {dim}, "
        f"{ds.x_train.shape[0]} train / {ds.x_test.shape[0]} test"
    )


def _resolve_train_config(doc: dict) -> tuple[training.TrainConfig, dict, dict]:
    """Build TrainConfig plus encoder/data sections from a config document."""
    section = doc.get("train", doc)
    cfg = training.TrainConfig(
        epochs=int(section.get("epochs", 30)),
        lr=float(section.get("lr", 0.1)),
        momentum=float(section.get("momentum", 0.9)),
        weight_decay=float(section.get("weight_decay", 5e-4)),
        lr_decay_epochs=tuple(section.get("lr_decay_epochs", (100, 150))),
        lr_decay_factor=float(section.get("lr_decay_factor", 0.1)),
        alpha=float(section.get("alpha", 3.0)),
        attack=_attack_from_dict(section.get("attack")),
        loss=_loss_from_dict(section.get("loss")),
        seed=int(section.get("seed", 0)),
        batch_size=int(section.get("batch_size", 128)),
        curve_attack=(
            _attack_from_dict(section["curve_attack"])
            if section.get("curve_attack") else None
        ),
    )
    return cfg, section.get("encoder", {}), section.get("data", {})


@cli.command("train")
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--anchors", "anchors_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "model_path", required=True, type=click.Path(dir_okay=False))
@click.option("--curve", "curve_path", required=True, type=click.Path(dir_okay=False))
@click.option("--data", "data_path", type=click.Path(exists=True, dir_okay=False),
              help="Dataset .npz; omitted: generated from the config's data section.")
def train_cmd(config_path, anchors_path, model_path, curve_path, data_path):
    """Adversarially train an encoder against an anchor file."""
    doc = io.load_config_file(config_path)
    cfg, enc_section, data_section = _resolve_train_config(doc)
    loaded = io.load_anchor_file(anchors_path)
    if data_path:
        dataset = io.load_dataset(data_path)
    else:
        if not data_section:
            raise ValueError("no --data file and no data section in the config")
        dataset = training.make_synthetic_dataset(
            num_classes=int(data_section["classes"]),
            dim=int(data_section["dim"]),
            samples_per_class=int(data_section.get("samples_per_class", 100)),
            spread=float(data_section["spread"]),
            seed=int(data_section.get("seed", 0)),
        )
    hidden = list(enc_section.get("hidden", (128, 128)))
    encoder = FeatureEncoder(
        [dataset.dim, *hidden, loaded.anchors.dim],
        seed=int(enc_section.get("seed", cfg.seed)),
    )
    encoder, curve = training.train(encoder, dataset, loaded.anchors, cfg)
    io.save_model(model_path, encoder, meta={"anchors": str(anchors_path)})
    io.save_curve_csv(curve_path, curve)
    final = curve.final()
    _echo_json({
        "resolved_config": {
            "epochs": cfg.epochs, "lr": cfg.lr, "momentum": cfg.momentum,
            "weight_decay": cfg.weight_decay,
            "lr_decay_epochs": list(cfg.lr_decay_epochs),
            "lr_decay_factor": cfg.lr_decay_factor, "alpha": cfg.alpha,
            "batch_size": cfg.batch_size, "seed": cfg.seed,
            "loss": asdict(cfg.loss), "attack": _attack_to_dict(cfg.attack),
            "encoder_dims": encoder.layer_dims,
        },
        "final": {
            "epoch": final.epoch, "train_loss": final.train_loss,
            "clean_acc": final.clean_acc, "robust_acc": final.robust_acc,
        },
        "model": str(model_path),
        "curve": str(curve_path),
    })


def _attack_overrides(epsilon, steps, step_size, random_start):
    overrides = {}
    if epsilon is not None:
        overrides["epsilon"] = epsilon
    if steps is not None:
        overrides["steps"] = steps
    if step_size is not None:
        overrides["step_size"] = step_size
    if random_start is not None:
        overrides["random_start"] = random_start
    return overrides


@cli.command("attack")
@click.option("--model", "model_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--anchors", "anchors_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--data", "data_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--preset", required=True,
              type=click.Choice(sorted(attack_presets())))
@click.option("--epsilon", type=float, default=None)
@click.option("--steps", type=int, default=None)
@click.option("--step-size", type=float, default=None)
@click.option("--random-start/--no-random-start", default=None)
@click.option("--seed", default=0, type=int, show_default=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False))
def attack_cmd(model_path, anchors_path, data_path, preset, epsilon, steps,
               step_size, random_start, seed, out_path):
    """Run one attack recipe over a dataset's test split."""
    cfg = attack_preset(
        preset, **_attack_overrides(epsilon, steps, step_size, random_start)
    )
    encoder = io.load_model(model_path)
    loaded = io.load_anchor_file(anchors_path)
    dataset = io.load_dataset(data_path)
    report = evaluation.evaluate(encoder, loaded.anchors, dataset,
                                 attacks={preset: cfg}, seed=seed)
    _echo_json(report.to_dict(), out_path)


@cli.command("eval")
@click.option("--model", "model_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--anchors", "anchors_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--data", "data_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--n-way", type=int, default=None,
              help="Episodic n-way evaluation instead of full-way.")
@click.option("--k-shot", type=int, default=0, show_default=True)
@click.option("--tasks", type=int, default=200, show_default=True)
@click.option("--queries", type=int, default=15, show_default=True,
              help="Query examples per class per task.")
@click.option("--beta", type=float, default=2.0, show_default=True,
              help="Text weight for blended anchors (k-shot > 0).")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--attacks", "attack_names", default="fgsm,pgd20", show_default=True,
              help="Comma-separated attack presets; empty for clean only.")
@click.option("--out", "out_path", type=click.Path(dir_okay=False))
def eval_cmd(model_path, anchors_path, data_path, n_way, k_shot, tasks, queries,
             beta, seed, attack_names, out_path):
    """Evaluate a model: full-way by default, episodic with --n-way."""
    encoder = io.load_model(model_path)
    loaded = io.load_anchor_file(anchors_path)
    dataset = io.load_dataset(data_path)
    attack_cfgs = {
        name: attack_preset(name)
        for name in attack_names.split(",") if name
    }
    if n_way is None:
        report = evaluation.evaluate(encoder, loaded.anchors, dataset,
                                     attacks=attack_cfgs, seed=seed)
        _echo_json(report.to_dict(), out_path)
        return
    task_list = evaluation.sample_nway_tasks(dataset, n_way, k_shot, tasks, seed,
                                             query_per_class=queries)
    text_rows = training.align_anchors(loaded.anchors, dataset.class_names)
    mode = "text" if k_shot == 0 else "blended"
    clean_acc, per_task = evaluation.evaluate_tasks(
        encoder, dataset, task_list, anchor_mode=mode,
        text_anchor_rows=text_rows, beta=beta, seed=seed,
    )
    ci95 = 1.96 * float(np.std(per_task, ddof=1)) / np.sqrt(len(per_task)) \
        if len(per_task) > 1 else 0.0
    robust = {}
    for name, cfg in attack_cfgs.items():
        robust[name], _ = evaluation.evaluate_tasks(
            encoder, dataset, task_list, anchor_mode=mode,
            text_anchor_rows=text_rows, beta=beta, attack=cfg, seed=seed,
        )
    report = evaluation.EvalReport(
        clean_acc=clean_acc, robust_acc=robust, n_way=n_way, k_shot=k_shot,
        anchor_mode=mode,
        flags={
            "seed": seed, "tasks": tasks, "queries": queries, "beta": beta,
            "clean_ci95": ci95,
            "attacks": {n: _attack_to_dict(c) for n, c in attack_cfgs.items()},
        },
    )
    _echo_json(report.to_dict(), out_path)


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 1
    except click.exceptions.ClickException as e:
        e.show()
        return 1
    except (io.AnchorFileError, geometry.GeometryError, NumericsError,
            ValueError, RuntimeError, OSError) as e:
        click.echo(f"error: {e}", err=True)
        return 2


if __name__ == "__main__":
    sys.exit(main())
