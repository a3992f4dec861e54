"""Command-line entry point: ``brgm <command> [options]``.

Exit status is 0 on success, 1 on a usage error and 2 on a runtime error.
Every command that writes files also writes ``<command>.cfg`` (the fully
resolved options) beside its first output; ``--config`` reads such a file
back, with explicit flags taking precedence.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from pathlib import Path

from . import corruption, generators, imageio, losses, metrics, optim, variational
from .config import default_seed, read_config, rng_stream, stream_seed, write_config
from .errors import BRGMError, ConfigError
from .perceptual import PerceptualNet

PRIOR_DRAWS = 10_000
_OPTIONAL = {"kernel", "mask", "prior", "out_corrupted", "trace", "percept_seed", "csv", "seed"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _onoff(text: str) -> bool:
    if text in ("on", "true", "1", "yes"):
        return True
    if text in ("off", "false", "0", "no"):
        return False
    raise ValueError(f"expected on|off, got {text!r}")


def _opt_int(text: str):
    return None if text in ("", None) else int(text)


def _opt_str(text: str):
    return None if text in ("", None) else text


_OP = [
    ("op", str, "downsample"),
    ("kernel", _opt_str, None),
    ("factor", int, 4),
    ("mask", _opt_str, None),
]
_LAMBDAS = [
    ("lambda_c", float, 0.03),
    ("lambda_pixel", float, 1e-5),
    ("lambda_percept", float, 0.01),
    ("lr", float, 0.001),
    ("percept_seed", _opt_int, None),
]

COMMANDS: dict[str, list[tuple]] = {
    "corrupt": [("input", str, None)] + _OP + [("out", str, None)],
    "reconstruct": [("input", str, None), ("generator", str, None), ("prior", _opt_str, None)]
    + _OP + _LAMBDAS + [
        ("steps", int, 5000),
        ("out_clean", str, None),
        ("out_corrupted", _opt_str, None),
        ("trace", _opt_str, None),
    ],
    "sample": [("input", str, None), ("generator", str, None), ("prior", _opt_str, None)]
    + _OP + _LAMBDAS + [
        ("n", int, 5),
        ("steps", int, 5000),
        ("warmup_steps", int, 500),
        ("n_mc", int, 3),
        ("sigma_prior", _onoff, True),
        ("alpha", float, 0.1),
        ("beta", float, 0.95),
        ("out_dir", str, None),
    ],
    "fit-linear": [("dir", str, None), ("latent_dim", int, None), ("layers", int, 1),
                   ("out", str, None)],
    "estimate-prior": [("generator", str, None), ("n", int, PRIOR_DRAWS), ("out", str, None)],
    "evaluate": [("ref", str, None), ("test", str, None), ("csv", _opt_str, None),
                 ("percept_seed", _opt_int, None)],
}
for _opts in COMMANDS.values():
    _opts.append(("seed", int, None))


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="brgm", description="Latent-space Bayesian image restoration.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    for name, opts in COMMANDS.items():
        p = sub.add_parser(name)
        p.add_argument("--config", default=argparse.SUPPRESS)
        for key, _, _ in opts:
            p.add_argument("--" + key.replace("_", "-"), dest=key, default=argparse.SUPPRESS)
    return parser


def resolve(command: str, explicit: dict) -> dict:
    """Merge defaults < config file < explicit flags and convert types."""
    opts = COMMANDS[command]
    keys = [k for k, _, _ in opts]
    merged: dict = dict.fromkeys(keys)
    raw: dict = {}
    if "config" in explicit:
        raw.update(read_config(explicit.pop("config"), allowed={*keys, "command"}))
        cfg_cmd = raw.pop("command", command)
        if cfg_cmd != command:
            raise ConfigError(f"config was written by {cfg_cmd!r}, not {command!r}")
    raw.update(explicit)
    for key, kind, default in opts:
        if key in raw:
            try:
                merged[key] = kind(raw[key]) if raw[key] is not None else None
            except ValueError as exc:
                raise UsageError(f"--{key.replace('_', '-')}: {exc}") from exc
        else:
            merged[key] = default
    if merged["seed"] is None:
        merged["seed"] = default_seed()
    missing = [k for k, _, _ in opts if merged[k] is None and k not in _OPTIONAL]
    if missing:
        raise UsageError("missing required option(s): " + ", ".join("--" + m.replace("_", "-") for m in missing))
    return merged


def _record(cfg: dict, command: str, first_output) -> None:
    path = Path(first_output)
    folder = path if path.is_dir() else path.parent
    write_config(folder / f"{command}.cfg", {"command": command, **cfg})


def _make_op(cfg: dict):
    if cfg["op"] == "downsample":
        kernel = corruption.parse_kernel(cfg["kernel"] or f"box:{cfg['factor']}")
        return corruption.Downsample(kernel, cfg["factor"])
    if cfg["op"] == "mask":
        if not cfg["mask"]:
            raise UsageError("--op mask requires --mask <image>")
        return corruption.mask_from_image(cfg["mask"])
    raise UsageError(f"unknown --op {cfg['op']!r}")


def _percept_net(cfg: dict, channels: int) -> PerceptualNet:
    seed = cfg["percept_seed"]
    if seed is None:
        seed = stream_seed(cfg["seed"], "percept")
    return PerceptualNet(seed=seed, in_channels=channels)


def _channels(shape) -> int:
    return 1 if len(shape) == 2 else shape[0]


def _load_problem(cfg: dict):
    gen = generators.load_weights(Path(cfg["generator"]).read_bytes())
    if cfg["prior"]:
        prior = generators.load_prior(Path(cfg["prior"]).read_bytes())
    else:
        sampler = generators.generator_sampler(gen, rng_stream(cfg["seed"], "sampler"))
        prior = generators.estimate_latent_prior(sampler, PRIOR_DRAWS)
    target = imageio.load_image(cfg["input"])
    op = _make_op(cfg)
    net = _percept_net(cfg, _channels(gen.output_shape))
    return gen, prior, target, op, net


def _hyper(cfg: dict, **extra) -> losses.HyperParams:
    return losses.HyperParams(
        lambda_c=cfg["lambda_c"], lambda_pixel=cfg["lambda_pixel"],
        lambda_percept=cfg["lambda_percept"], lr=cfg["lr"], steps=cfg["steps"],
        seed=cfg["seed"], **extra,
    )


def cmd_corrupt(cfg: dict) -> None:
    image = imageio.load_image(cfg["input"])
    out = corruption.apply(_make_op(cfg), image)
    imageio.save_image(out, cfg["out"])
    _record(cfg, "corrupt", cfg["out"])


def cmd_reconstruct(cfg: dict) -> None:
    gen, prior, target, op, net = _load_problem(cfg)
    result = optim.reconstruct_map(target, gen, op, net, prior, _hyper(cfg))
    imageio.save_image(result.clean, cfg["out_clean"])
    if cfg["out_corrupted"]:
        imageio.save_image(result.corrupted, cfg["out_corrupted"])
    if cfg["trace"]:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(optim.TRACE_COLUMNS)
        for row in result.trace:
            writer.writerow([row[0]] + [repr(float(v)) for v in row[1:]])
        Path(cfg["trace"]).write_text(buf.getvalue(), encoding="utf-8")
    _record(cfg, "reconstruct", cfg["out_clean"])


def cmd_sample(cfg: dict) -> None:
    gen, prior, target, op, net = _load_problem(cfg)
    hp = _hyper(cfg, n_mc=cfg["n_mc"], use_sigma_prior=cfg["sigma_prior"], alpha=cfg["alpha"],
                beta=cfg["beta"], warmup_steps=cfg["warmup_steps"])
    theta = variational.fit_variational(target, gen, op, net, prior, hp)
    images = variational.sample_reconstructions(theta, gen, cfg["n"], seed=cfg["seed"])
    out = Path(cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    ext = imageio.extension_for(images[0])
    imageio.save_image(images[0], out / f"mean{ext}")
    for i, img in enumerate(images[1:], 1):
        imageio.save_image(img, out / f"sample_{i:02d}{ext}")
    _record(cfg, "sample", out)


def cmd_fit_linear(cfg: dict) -> None:
    folder = Path(cfg["dir"])
    paths = sorted(p for p in folder.iterdir() if p.suffix.lower() in (".pgm", ".ppm"))
    images = [imageio.load_image(p) for p in paths]
    gen = generators.fit_linear_generator(images, cfg["latent_dim"], cfg["layers"])
    Path(cfg["out"]).write_bytes(generators.save_weights(gen))
    _record(cfg, "fit-linear", cfg["out"])


def cmd_estimate_prior(cfg: dict) -> None:
    gen = generators.load_weights(Path(cfg["generator"]).read_bytes())
    sampler = generators.generator_sampler(gen, rng_stream(cfg["seed"], "sampler"))
    prior = generators.estimate_latent_prior(sampler, cfg["n"])
    Path(cfg["out"]).write_bytes(generators.save_prior(prior))
    _record(cfg, "estimate-prior", cfg["out"])


def cmd_evaluate(cfg: dict) -> None:
    ref = imageio.load_image(cfg["ref"])
    test = imageio.load_image(cfg["test"])
    report = metrics.MetricReport.compare(ref, test, _percept_net(cfg, _channels(ref.shape)))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["rmse", "psnr", "ssim", "mae", "percept"])
    writer.writerow([repr(report.rmse), repr(report.psnr), repr(report.ssim), repr(report.mae),
                     repr(report.percept)])
    text = buf.getvalue()
    sys.stdout.write(text)
    if cfg["csv"]:
        Path(cfg["csv"]).write_text(text, encoding="utf-8")
        _record(cfg, "evaluate", cfg["csv"])


HANDLERS = {
    "corrupt": cmd_corrupt,
    "reconstruct": cmd_reconstruct,
    "sample": cmd_sample,
    "fit-linear": cmd_fit_linear,
    "estimate-prior": cmd_estimate_prior,
    "evaluate": cmd_evaluate,
}


def main(argv=None) -> int:
    try:
        ns = vars(build_parser().parse_args(argv))
        command = ns.pop("command", None)
        if command is None:
            raise UsageError("a command is required: " + ", ".join(COMMANDS))
        cfg = resolve(command, ns)
    except (UsageError, ConfigError) as exc:
        print(f"brgm: usage error: {exc}", file=sys.stderr)
        return 1
    try:
        HANDLERS[command](cfg)
    except UsageError as exc:
        print(f"brgm: usage error: {exc}", file=sys.stderr)
        return 1
    except (BRGMError, OSError) as exc:
        print(f"brgm: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
