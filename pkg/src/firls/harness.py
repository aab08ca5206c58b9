"""Data generation, file I/O and experiment orchestration.

Everything is deterministic under a fixed seed: generators use
numpy's seeded Generator, solvers are deterministic, and outputs
(trace CSV, PGM images, mask files) are byte-stable except for the
wall-time column of the trace.
"""

import dataclasses
import re
import warnings
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError
from .metrics import VARIANCE_CONVENTION
from .og import OgProblem, default_lambda, firls_og_solve
from .operators import (
    GaussianOperator,
    GroupConfig,
    IndexSelectionOperator,
    OrthogonalTransform,
    PartialFourierOperator,
    PerChannelOperator,
    PerChannelTransform,
    chained_pair_groups,
    identity_groups,
    joint_sparsity_groups,
    wavelet_tree_groups,
)
from .pcg import PcgConfig
from .phantom import gen_shepp_logan
from .tv import TvProblem, firls_tv_solve

PROBLEM_KINDS = ("l1", "og", "tree", "mt", "tv")
SAMPLING_KINDS = ("fourier", "gaussian", "select")


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------

def gen_sparse_signal(N, K, seed=0):
    """K-sparse signal: uniform support, standard normal values."""
    if K > N or K < 0:
        raise ConfigError("need 0 <= K <= N")
    rng = np.random.default_rng(seed)
    x = np.zeros(N)
    if K:
        support = rng.choice(N, size=K, replace=False)
        x[support] = rng.standard_normal(K)
    return x


def _fourier_radius(shape):
    freqs = [np.fft.fftfreq(s) * s for s in shape]
    grids = np.meshgrid(*freqs, indexing="ij")
    return np.sqrt(sum(g**2 for g in grids)).ravel()


def _variable_density_mask(shape, ratio, seed):
    if not 0.0 < ratio <= 1.0:
        raise ConfigError("ratio must lie in (0, 1]")
    n_total = int(np.prod(shape))
    m = int(round(ratio * n_total))
    m = max(m, 1)
    if m == n_total:
        return np.arange(n_total)
    radius = _fourier_radius(shape)
    sigma = max(shape[-1] / 8.0, 1.0)
    prob = (1.0 + radius / sigma) ** -2.0
    prob[0] = 0.0  # DC is forced in separately
    prob /= prob.sum()
    rng = np.random.default_rng(seed)
    rest = rng.choice(n_total, size=m - 1, replace=False, p=prob)
    return np.sort(np.concatenate([[0], rest]))


def gen_fourier_mask(n, ratio, seed=0):
    """Variable-density 2D k-space mask over an n x n grid.

    Sampling probability decays as (1 + r/sigma)^-2 with sigma = n/8;
    the DC index is always included and |mask| = round(ratio * n^2).
    """
    return _variable_density_mask((n, n), ratio, seed)


def gen_fourier_mask_1d(N, ratio, seed=0):
    """1D variable-density mask, same density law as the 2D version."""
    return _variable_density_mask((N,), ratio, seed)


def gen_joint_sparse_signals(N, K, channels, seed=0):
    """Channels share a support; values are independent per channel."""
    if K > N or K < 0:
        raise ConfigError("need 0 <= K <= N")
    rng = np.random.default_rng(seed)
    x = np.zeros((channels, N))
    if K:
        support = rng.choice(N, size=K, replace=False)
        x[:, support] = rng.standard_normal((channels, K))
    return x.ravel()


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------

def write_pgm(path, img):
    """Write a binary 8-bit PGM (P5), min-max scaled to [0, 255].

    Returns (lo, hi), the intensity range mapped onto 0..255.
    """
    img = np.asarray(img, dtype=float)
    if img.ndim != 2:
        raise ConfigError("PGM output expects a 2D image")
    lo, hi = float(img.min()), float(img.max())
    scale = 255.0 / (hi - lo) if hi > lo else 0.0
    data = np.round((img - lo) * scale).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{img.shape[1]} {img.shape[0]}\n255\n".encode())
        fh.write(data.tobytes())
    return lo, hi


def read_pgm(path):
    """Read a binary 8-bit PGM into a float image in [0, 1]."""
    with open(path, "rb") as fh:
        raw = fh.read()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        match = re.match(rb"\s*(?:#[^\n]*\n)*\s*(\S+)", raw[pos:])
        if not match:
            raise ConfigError(f"invalid PGM header in {path}")
        tokens.append(match.group(1))
        pos += match.end()
    if tokens[0] != b"P5":
        raise ConfigError(f"{path}: only binary (P5) PGM is supported")
    width, height, maxval = (int(t) for t in tokens[1:])
    if maxval > 255:
        raise ConfigError(f"{path}: only 8-bit PGM is supported")
    data = np.frombuffer(raw[pos + 1 : pos + 1 + width * height], dtype=np.uint8)
    if data.size != width * height:
        raise ConfigError(f"{path}: truncated PGM payload")
    return data.reshape(height, width).astype(float) / float(maxval)


def write_mask(path, indices, n, ratio, seed):
    """Mask file: '# n=<n> ratio=<r> seed=<s>' then one index per line."""
    with open(path, "w") as fh:
        fh.write(f"# n={n} ratio={ratio} seed={seed}\n")
        for idx in np.asarray(indices, dtype=int):
            fh.write(f"{idx}\n")


def read_mask(path):
    with open(path) as fh:
        header = fh.readline()
        match = re.match(r"#\s*n=(\S+)\s+ratio=(\S+)\s+seed=(\S+)", header)
        if not match:
            raise ConfigError(f"{path}: missing mask header line")
        meta = {
            "n": int(match.group(1)),
            "ratio": float(match.group(2)),
            "seed": int(match.group(3)),
        }
        indices = np.array([int(line) for line in fh if line.strip()], dtype=np.intp)
    return indices, meta


TRACE_COLUMNS = ("iter", "objective", "mse", "snr_db", "pcg_iters", "elapsed_ms")


def write_trace_csv(path, report, config_echo=None, image_scale=None):
    """Per-iteration trace; '#' header lines echo config and conventions."""
    echo = dict(config_echo or {})
    with open(path, "w") as fh:
        if echo:
            pairs = " ".join(f"{k}={v}" for k, v in sorted(echo.items()))
            fh.write(f"# config: {pairs}\n")
        fh.write(f"# variance={VARIANCE_CONVENTION}\n")
        if image_scale is not None:
            fh.write(f"# image_scale: lo={image_scale[0]!r} hi={image_scale[1]!r}\n")
        fh.write(",".join(TRACE_COLUMNS) + "\n")
        for r in report.records:
            fh.write(
                f"{r.iteration},{r.objective:.17g},{r.mse:.17g},"
                f"{r.snr_db:.17g},{r.pcg_iterations},{r.elapsed_ms:.3f}\n"
            )


# ---------------------------------------------------------------------------
# Experiment orchestration
# ---------------------------------------------------------------------------

@dataclass
class ExperimentConfig:
    problem: str
    sampling: str = "fourier"
    ratio: float = 0.25
    lam: float = None
    eps: float = 1e-10
    outer_iters: int = 30
    pcg_iters: int = 30
    pcg_tol: float = 1e-8
    seed: int = 0
    signal: tuple = None          # (N, K) for 1D problems
    image_path: str = None
    side: int = 64                # phantom side when no image is given
    channels: int = 2             # mt only
    wavelet: str = "haar"
    tv_variant: str = "isotropic"
    out_image: str = None
    out_trace: str = None
    out_figure: str = None
    out_mask: str = None

    def __post_init__(self):
        if self.problem not in PROBLEM_KINDS:
            raise ConfigError(f"unknown problem kind {self.problem!r}")
        if self.sampling not in SAMPLING_KINDS:
            raise ConfigError(f"unknown sampling kind {self.sampling!r}")
        if not 0.0 < self.ratio <= 1.0:
            raise ConfigError("sampling ratio must lie in (0, 1]")
        if self.signal is not None and self.image_path is not None:
            raise ConfigError("give either a signal spec or an image, not both")
        if self.problem == "tv" and self.signal is not None:
            raise ConfigError("tv reconstruction requires an image")
        if self.problem == "mt" and self.image_path is not None:
            raise ConfigError("mt runs on generated joint-sparse signals")
        if self.problem == "mt" and self.channels < 2:
            raise ConfigError("mt requires >= 2 channels")


def _load_image(cfg):
    img = read_pgm(cfg.image_path)
    h, w = img.shape
    side = min(h, w)
    if cfg.problem != "tv":
        # Wavelet problems need a power-of-two side.
        side = 1 << (side.bit_length() - 1)
    if (h, w) != (side, side):
        warnings.warn(
            f"center-cropping {h}x{w} input to {side}x{side}", stacklevel=2
        )
        r0 = (h - side) // 2
        c0 = (w - side) // 2
        img = img[r0 : r0 + side, c0 : c0 + side]
    return img.ravel(), side


def _build_ground_truth(cfg):
    """Returns (x_true, geometry) with geometry (N,) or (side, side)."""
    if cfg.problem == "mt":
        if cfg.signal is None:
            raise ConfigError("mt requires --signal N,K")
        N, K = cfg.signal
        return gen_joint_sparse_signals(N, K, cfg.channels, cfg.seed), (N,)
    if cfg.signal is not None:
        N, K = cfg.signal
        return gen_sparse_signal(N, K, cfg.seed), (N,)
    if cfg.image_path is not None:
        flat, side = _load_image(cfg)
        return flat, (side, side)
    if cfg.problem == "tv":
        return gen_shepp_logan(cfg.side), (cfg.side, cfg.side)
    raise ConfigError(f"problem {cfg.problem!r} needs --signal or --image")


def _build_operator(cfg, geometry):
    n_total = int(np.prod(geometry))
    rng = np.random.default_rng(cfg.seed)
    if cfg.sampling == "fourier":
        if len(geometry) == 2:
            mask = gen_fourier_mask(geometry[0], cfg.ratio, cfg.seed)
        else:
            mask = gen_fourier_mask_1d(n_total, cfg.ratio, cfg.seed)
        return PartialFourierOperator(geometry, mask), mask
    m = max(int(round(cfg.ratio * n_total)), 1)
    if cfg.sampling == "gaussian":
        return GaussianOperator(m, n_total, cfg.seed), None
    indices = np.sort(rng.choice(n_total, size=m, replace=False))
    return IndexSelectionOperator(n_total, indices), None


def _build_sparsity(cfg, geometry):
    """Phi and GroupConfig for the OG-family problems."""
    n_total = int(np.prod(geometry))
    is_image = len(geometry) == 2
    if cfg.problem == "mt":
        return (
            PerChannelTransform(_sized_identity(n_total), cfg.channels),
            joint_sparsity_groups(n_total, cfg.channels),
        )
    if is_image:
        phi = OrthogonalTransform(cfg.wavelet, geometry)
    else:
        phi = _sized_identity(n_total)
    if cfg.problem == "l1":
        groups = identity_groups(n_total)
    elif cfg.problem == "og":
        groups = chained_pair_groups(n_total)
    elif cfg.problem == "tree":
        if not is_image:
            phi = OrthogonalTransform(cfg.wavelet, (n_total,))
        groups = wavelet_tree_groups(phi)
    else:
        raise ConfigError(f"no sparsity model for problem {cfg.problem!r}")
    return phi, groups


def _sized_identity(n_total):
    return OrthogonalTransform("identity", (n_total,))


def run_experiment(cfg):
    """Build operators, run the configured solver, write outputs.

    Returns the SolveReport.  Idempotent per seed: identical configs give
    identical reconstructions, traces (up to wall time) and images.
    """
    x_true, geometry = _build_ground_truth(cfg)
    if cfg.problem == "mt":
        base_op, mask = _build_operator(cfg, geometry)
        A = PerChannelOperator(base_op, cfg.channels)
    else:
        A, mask = _build_operator(cfg, geometry)
    b = A.forward(x_true)
    lam = cfg.lam if cfg.lam is not None else default_lambda(A, b)
    pcg_cfg = PcgConfig(
        max_iterations=cfg.pcg_iters, relative_residual_tolerance=cfg.pcg_tol
    )

    if cfg.problem == "tv":
        problem = TvProblem(
            A=A, b=b, side=geometry[0], lam=lam, eps=cfg.eps,
            variant=cfg.tv_variant,
        )
        report = firls_tv_solve(
            problem, outer_iters=cfg.outer_iters, pcg_cfg=pcg_cfg, x_true=x_true
        )
    else:
        phi, groups = _build_sparsity(cfg, geometry)
        problem = OgProblem(
            A=A, b=b, phi=phi, groups=groups, lam=lam, eps=cfg.eps
        )
        report = firls_og_solve(
            problem, outer_iters=cfg.outer_iters, pcg_cfg=pcg_cfg, x_true=x_true
        )

    report.metadata.update(
        {
            "problem": cfg.problem,
            "sampling": cfg.sampling,
            "ratio": cfg.ratio,
            "seed": cfg.seed,
            "dims": "x".join(str(g) for g in geometry),
        }
    )
    _write_outputs(cfg, report, x_true, geometry, mask, lam)
    return report


def _write_outputs(cfg, report, x_true, geometry, mask, lam):
    image_scale = None
    if cfg.out_image is not None:
        if len(geometry) != 2:
            raise ConfigError("--out-image requires a 2D problem")
        image_scale = write_pgm(cfg.out_image, report.x.reshape(geometry))
    if cfg.out_mask is not None:
        if mask is None:
            raise ConfigError("--out-mask requires fourier sampling")
        write_mask(cfg.out_mask, mask, geometry[0], cfg.ratio, cfg.seed)
    if cfg.out_trace is not None:
        echo = {
            "problem": cfg.problem,
            "sampling": cfg.sampling,
            "ratio": cfg.ratio,
            "lambda": f"{lam:.17g}",
            "epsilon": cfg.eps,
            "outer": cfg.outer_iters,
            "pcg_iters": cfg.pcg_iters,
            "pcg_tol": cfg.pcg_tol,
            "seed": cfg.seed,
        }
        write_trace_csv(cfg.out_trace, report, echo, image_scale)
    if cfg.out_figure is not None:
        from .plots import render_trace_figure

        render_trace_figure(report, cfg.out_figure)


def config_from_cli(**kwargs):
    """Build an ExperimentConfig from CLI-shaped keyword arguments."""
    signal = kwargs.pop("signal", None)
    if isinstance(signal, str):
        parts = signal.split(",")
        if len(parts) != 2:
            raise ConfigError("--signal expects N,K")
        try:
            signal = (int(parts[0]), int(parts[1]))
        except ValueError as exc:
            raise ConfigError(f"--signal expects integers: {exc}") from exc
    fields = {f.name for f in dataclasses.fields(ExperimentConfig)}
    unknown = set(kwargs) - fields
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return ExperimentConfig(signal=signal, **kwargs)
