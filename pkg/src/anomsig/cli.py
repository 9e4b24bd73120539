"""Command-line client for the service.

Every subcommand talks HTTP: by default to an in-process app instance, or
to a running server via --server. Artifacts (CSV text, JSON documents) are
written client-side exactly as the service returned them.
"""

from __future__ import annotations

import json
from pathlib import Path

import click
import httpx


def _post(server: str | None, path: str, payload: dict) -> dict:
    if server:
        with httpx.Client(base_url=server, timeout=None) as client:
            resp = client.post(path, json=payload)
    else:
        import warnings

        with warnings.catch_warnings():
            # starlette warns about its own httpx shim at import; not actionable here
            warnings.simplefilter("ignore")
            from starlette.testclient import TestClient

        from .service.app import create_app

        with TestClient(create_app()) as client:
            resp = client.post(path, json=payload)
    if resp.status_code != 200:
        raise click.ClickException(
            f"{path} failed [{resp.status_code}]: {resp.text[:500]}"
        )
    return resp.json()


def _write(out_dir: str, name: str, text: str) -> Path:
    path = Path(out_dir)
    path.mkdir(parents=True, exist_ok=True)
    target = path / name
    target.write_text(text)
    return target


def _write_json(out_dir: str, name: str, doc) -> Path:
    return _write(out_dir, name, json.dumps(doc, indent=2) + "\n")


def _floats(text: str) -> list[float]:
    return [float(part) for part in text.split(",") if part.strip()]


_PARAM_OPTIONS = [
    click.option("--n", default=64, show_default=True, help="Pixels per image (square)."),
    click.option("--cov", default="iid", show_default=True,
                 type=click.Choice(["iid", "ar"]), help="Noise covariance model."),
    click.option("--rho", default=0.5, show_default=True, help="AR correlation."),
    click.option("--lambda", "lam", default=0.8, show_default=True,
                 help="Detection threshold on the error map."),
    click.option("--kernel", default=3, show_default=True, help="Averaging filter size."),
    click.option("--tprime", default=460, show_default=True, help="Noising timestep."),
    click.option("--steps", default=5, show_default=True, help="Reverse steps."),
    click.option("--eta", default=1.0, show_default=True, help="Reverse-step noise scale."),
    click.option("--alpha", default=0.05, show_default=True, help="Significance level."),
    click.option("--trials", default=500, show_default=True, help="Trials per setting."),
    click.option("--seed", default=0, show_default=True, help="Master seed."),
    click.option("--workers", default=0, show_default=True,
                 help="Worker processes (<=1 runs inline)."),
    click.option("--permutations", default=0, show_default=True,
                 help="Permutation-test draws (0 disables)."),
    click.option("--server", default=None, help="Remote service URL (default: in-process)."),
    click.option("--out", "out_dir", default="out", show_default=True,
                 help="Directory for artifacts."),
]


def _with_params(fn):
    for opt in reversed(_PARAM_OPTIONS):
        fn = opt(fn)
    return fn


def _params_payload(kw: dict) -> dict:
    return {
        "n": kw["n"],
        "cov": kw["cov"],
        "rho": kw["rho"],
        "lambda": kw["lam"],
        "kernel": kw["kernel"],
        "tprime": kw["tprime"],
        "steps": kw["steps"],
        "eta": kw["eta"],
        "alpha": kw["alpha"],
        "trials": kw["trials"],
        "seed": kw["seed"],
        "workers": kw["workers"],
        "permutations": kw["permutations"],
    }


def _load_or_train_weights(
    weights_file: str | None,
    params: dict,
    server: str | None,
    out_dir: str,
    train_steps: int = 3000,
    train_images: int = 256,
) -> dict:
    if weights_file:
        return json.loads(Path(weights_file).read_text())
    click.echo("no --weights given; training a denoiser first", err=True)
    doc = _post(server, "/train", {
        "params": params,
        "train_steps": train_steps,
        "train_images": train_images,
    })
    _write_json(out_dir, "weights.json", doc["weights"])
    click.echo(
        f"trained: loss {doc['initial_loss']:.4f} -> {doc['final_loss']:.4f}",
        err=True,
    )
    return doc["weights"]


@click.group()
def main() -> None:
    """Selective inference for reconstruction-based anomaly detection."""


@main.command()
@_with_params
@click.option("--train-steps", default=3000, show_default=True, help="SGD steps.")
@click.option("--train-images", default=256, show_default=True, help="Dataset size.")
@click.option("--lr", default=3e-3, show_default=True, help="Learning rate.")
@click.option("--batch-size", default=16, show_default=True, help="Batch size.")
def train(train_steps, train_images, lr, batch_size, server, out_dir, **kw):
    """Train a denoiser and write weights.json plus a loss log."""
    payload = {
        "params": _params_payload(kw),
        "train_steps": train_steps,
        "train_images": train_images,
        "learning_rate": lr,
        "batch_size": batch_size,
    }
    doc = _post(server, "/train", payload)
    _write_json(out_dir, "weights.json", doc["weights"])
    _write_json(out_dir, "train_log.json", {
        "initial_loss": doc["initial_loss"],
        "final_loss": doc["final_loss"],
        "history": doc["history"],
    })
    click.echo(f"loss {doc['initial_loss']:.4f} -> {doc['final_loss']:.4f}")
    click.echo(f"wrote {Path(out_dir) / 'weights.json'}")


@main.command("test-one")
@_with_params
@click.option("--x", "x_file", required=True, type=click.Path(exists=True),
              help="JSON array: test image.")
@click.option("--x-ref", "x_ref_file", required=True, type=click.Path(exists=True),
              help="JSON array: reference image.")
@click.option("--weights", "weights_file", required=True, type=click.Path(exists=True))
@click.option("--plan-seed", default=0, show_default=True)
def test_one(x_file, x_ref_file, weights_file, plan_seed, server, out_dir, **kw):
    """Test a single image pair; writes result.json."""
    payload = {
        "x": json.loads(Path(x_file).read_text()),
        "x_ref": json.loads(Path(x_ref_file).read_text()),
        "params": _params_payload(kw),
        "weights": json.loads(Path(weights_file).read_text()),
        "plan_seed": plan_seed,
    }
    doc = _post(server, "/test-one", payload)
    _write_json(out_dir, "result.json", doc)
    click.echo(f"p_selective={doc['p_selective']}  p_naive={doc['p_naive']}")
    click.echo(f"wrote {Path(out_dir) / 'result.json'}")


def _run_study_command(study: str, kw: dict, extra_params: dict | None = None):
    server, out_dir = kw["server"], kw["out_dir"]
    params = _params_payload(kw)
    if extra_params:
        params.update(extra_params)
    weights = _load_or_train_weights(
        kw["weights_file"], params, server, out_dir,
        kw["train_steps"], kw["train_images"],
    )
    doc = _post(server, f"/{study}", {"params": params, "weights": weights})
    _write(out_dir, "summary.csv", doc["summary_csv"])
    _write(out_dir, "trials.csv", doc["trials_csv"])
    _write_json(out_dir, "config.json", doc["config"])
    click.echo(
        f"{study}: {doc['completed']}/{doc['requested']} trials "
        f"(empty {doc['excluded_empty_region']}, error {doc['excluded_error']})"
    )
    for row in doc["summary_rows"]:
        if row["alpha"] != kw["alpha"]:
            continue
        prefix = (
            f"  {row['group']} {row['method']:11s} setting={row['setting']} "
            f"denom={row['denominator']}: "
        )
        if row["rejection_rate"] is None:
            click.echo(prefix + "rate=n/a (no qualifying trials)")
        else:
            click.echo(
                prefix + f"rate={row['rejection_rate']:.4f} "
                f"[{row['ci_lo']:.4f}, {row['ci_hi']:.4f}]"
            )
    click.echo(f"wrote {Path(out_dir) / 'summary.csv'}")


_WEIGHTS_OPTIONS = [
    click.option("--weights", "weights_file", default=None,
                 type=click.Path(exists=True),
                 help="Weights JSON; trains one when omitted."),
    click.option("--train-steps", default=3000, show_default=True,
                 help="SGD steps for the fallback training."),
    click.option("--train-images", default=256, show_default=True,
                 help="Dataset size for the fallback training."),
]


def _with_weights(fn):
    for opt in reversed(_WEIGHTS_OPTIONS):
        fn = opt(fn)
    return fn


@main.command()
@_with_params
@_with_weights
def type1(**kw):
    """Null study: rejection rates under no signal."""
    _run_study_command("type1", kw)


@main.command()
@_with_params
@_with_weights
@click.option("--deltas", default="1,2,3,4", show_default=True,
              help="Comma-separated signal magnitudes.")
def power(deltas, **kw):
    """Planted-signal study across signal magnitudes."""
    _run_study_command("power", kw, {"deltas": _floats(deltas)})


@main.command()
@_with_params
@_with_weights
@click.option("--families", default=",".join((
    "skew-normal", "exp-modified-gaussian", "generalized-normal", "student-t")),
    show_default=True, help="Comma-separated noise families.")
@click.option("--w1-targets", default="0.04", show_default=True,
              help="Comma-separated Wasserstein-1 targets.")
def robustness(families, w1_targets, **kw):
    """Type-1 study under calibrated non-Gaussian noise."""
    _run_study_command("robustness", kw, {
        "families": [f for f in families.split(",") if f],
        "w1_targets": _floats(w1_targets),
    })


@main.command("oracle-check")
@_with_params
@_with_weights
@click.option("--instances", default=20, show_default=True)
@click.option("--grid-step", default=1e-3, show_default=True)
def oracle_check(instances, grid_step, **kw):
    """Audit the truncation set against a brute-force z grid."""
    server, out_dir = kw["server"], kw["out_dir"]
    params = _params_payload(kw)
    params.update({"instances": instances, "grid_step": grid_step})
    weights = _load_or_train_weights(
        kw["weights_file"], params, server, out_dir,
        kw["train_steps"], kw["train_images"],
    )
    doc = _post(server, "/oracle-check", {"params": params, "weights": weights})
    _write(out_dir, "oracle.csv", doc["csv_text"])
    _write_json(out_dir, "config.json", doc["config"])
    click.echo(
        f"agreement {doc['agree_fraction']:.6f} "
        f"({doc['total_disagree']}/{doc['total_grid']} disagree), "
        f"all within 2*gamma: {doc['all_within_2gamma']}, "
        f"z_obs covered: {doc['all_z_obs_in']}, "
        f"max eval diff {doc['max_eval_diff']:.2e}"
    )
    click.echo(f"wrote {Path(out_dir) / 'oracle.csv'}")


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
def serve(host, port):
    """Run the HTTP service."""
    import uvicorn

    from .service.app import create_app

    uvicorn.run(create_app(), host=host, port=port)


if __name__ == "__main__":
    main()
