"""Command line interface.

Exit codes: 0 success, 2 invalid configuration, 3 numerical breakdown,
4 I/O failure.
"""

import functools
import sys

import click

from .bench import bench_preconditioners, write_bench_csv
from .exceptions import ConfigError, NumericalBreakdownError
from .harness import config_from_cli, run_experiment


def _exit_codes(func):
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except ConfigError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(2)
        except NumericalBreakdownError as exc:
            click.echo(f"numerical breakdown: {exc}", err=True)
            sys.exit(3)
        except OSError as exc:
            click.echo(f"I/O failure: {exc}", err=True)
            sys.exit(4)

    return wrapper


@click.group()
def main():
    """Fast reweighted least-squares sparse reconstruction."""


@main.command()
@click.option("--problem", type=click.Choice(["l1", "og", "tree", "mt", "tv"]),
              required=True)
@click.option("--image", "image_path", type=str, default=None,
              help="Input image (binary 8-bit PGM).")
@click.option("--signal", type=str, default=None, help="Sparse signal spec N,K.")
@click.option("--sampling", type=click.Choice(["fourier", "gaussian", "select"]),
              default="fourier", show_default=True)
@click.option("--ratio", type=float, default=0.25, show_default=True)
@click.option("--lambda", "lam", type=float, default=None,
              help="Regularization weight (default 0.01*||A^T b||_inf).")
@click.option("--epsilon", "eps", type=float, default=1e-10, show_default=True)
@click.option("--outer", "outer_iters", type=int, default=30, show_default=True)
@click.option("--pcg-iters", type=int, default=30, show_default=True)
@click.option("--pcg-tol", type=float, default=1e-8, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--channels", type=int, default=2, show_default=True,
              help="Channel count for the mt problem.")
@click.option("--wavelet", type=click.Choice(["haar", "db4"]), default="haar",
              show_default=True)
@click.option("--out-image", type=str, default=None)
@click.option("--out-trace", type=str, default=None)
@click.option("--out-figure", type=str, default=None)
@click.option("--out-mask", type=str, default=None)
@_exit_codes
def solve(**kwargs):
    """Run one reconstruction and write trace/image/figure outputs."""
    cfg = config_from_cli(**kwargs)
    report = run_experiment(cfg)
    last = report.records[-1]
    msg = f"{cfg.problem}: {last.iteration} outer iterations, " \
          f"objective {last.objective:.6g}"
    if last.snr_db == last.snr_db:  # not NaN
        msg += f", SNR {last.snr_db:.2f} dB"
    click.echo(msg)


@main.command("bench-precond")
@click.option("--matrix", type=click.Choice(["og", "tv"]), required=True)
@click.option("--n", "side", type=int, default=64, show_default=True)
@click.option("--ratio", type=float, default=None,
              help="Sampling ratio (defaults: og 0.4, tv 0.25).")
@click.option("--lambda", "lam", type=float, default=None)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--iters", type=int, default=200, show_default=True)
@click.option("--out-trace", type=str, default=None)
@click.option("--out-figure", type=str, default=None)
@_exit_codes
def bench_precond(matrix, side, ratio, lam, seed, iters, out_trace, out_figure):
    """Compare plain CG, Jacobi PCG and the proposed preconditioner."""
    traces = bench_preconditioners(
        matrix, side=side, sampling_ratio=ratio, lam=lam, seed=seed,
        iterations=iters,
    )
    for name in sorted(traces):
        trace = traces[name]
        click.echo(
            f"{name}: {len(trace)} iterations, final residual {trace[-1]:.3e}"
        )
    if out_trace:
        write_bench_csv(
            out_trace, traces,
            {"matrix": matrix, "n": side, "seed": seed, "iters": iters},
        )
    if out_figure:
        from .plots import render_bench_figure

        render_bench_figure(traces, out_figure, title=f"{matrix} preconditioning")


if __name__ == "__main__":
    main()
