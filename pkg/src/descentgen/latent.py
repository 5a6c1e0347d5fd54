"""Density models over concatenated fPCA weights: Gaussian, GMM sized by BIC, and a
masked affine autoregressive flow written directly in numpy.

Every model is fit on z-scored weights. The scaler is kept with the model, so
``sample`` returns weights in original units and ``log_density`` accepts them.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .dataio import load_artifact, save_artifact
from .errors import ArtifactError, DomainError, InsufficientDataError, TrainingDivergedError

log = logging.getLogger(__name__)

LOG_2PI = math.log(2.0 * math.pi)
GAUSS_REG = 1e-9
SAMPLES_PER_PARAM = 15


def param_count_gaussian(n_c: int) -> int:
    return n_c * (n_c + 3) // 2


def param_count_gmm(n_m: int, n_c: int) -> int:
    return n_m * param_count_gaussian(n_c) + (n_m - 1)


def max_components(n_tr: int, n_c: int) -> int:
    """Largest mixture size leaving at least 15 training trajectories per parameter."""
    if n_tr < 1 or n_c < 1:
        raise DomainError("n_tr and n_c must be positive")
    n_m = 1
    while SAMPLES_PER_PARAM * param_count_gmm(n_m + 1, n_c) <= n_tr:
        n_m += 1
    return n_m


@dataclass(frozen=True)
class Scaler:
    center: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, W) -> "Scaler":
        W = np.asarray(W, dtype=float)
        s = W.std(axis=0)
        s = np.where(s > 1e-12 * np.maximum(np.abs(W).max(axis=0), 1.0), s, 1.0)
        return cls(W.mean(axis=0), s)

    @classmethod
    def identity(cls, dim: int) -> "Scaler":
        return cls(np.zeros(dim), np.ones(dim))

    def transform(self, W):
        return (np.asarray(W, dtype=float) - self.center) / self.scale

    def inverse(self, Z):
        return np.asarray(Z) * self.scale + self.center

    @property
    def log_det(self) -> float:
        # log |dz/dw|
        return -float(np.sum(np.log(self.scale)))

    def to_dict(self):
        return {"center": self.center, "scale": self.scale}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["center"], dtype=float), np.asarray(d["scale"], dtype=float))


@dataclass
class FitReport:
    model_kind: str
    n_p: int
    bic_curve: list = field(default_factory=list)  # (n_m, BIC) pairs
    final_nll: float = float("nan")  # mean, original units
    iterations: int = 0
    notes: list = field(default_factory=list)

    def to_dict(self):
        return {"model_kind": self.model_kind, "n_p": self.n_p,
                "bic_curve": [[int(k), float(b)] for k, b in self.bic_curve],
                "final_nll": self.final_nll, "iterations": self.iterations, "notes": list(self.notes)}

    @classmethod
    def from_dict(cls, d):
        return cls(d["model_kind"], int(d["n_p"]), [(int(k), float(b)) for k, b in d["bic_curve"]],
                   float(d["final_nll"]), int(d["iterations"]), list(d.get("notes", [])))


# -- Gaussian kernels ---------------------------------------------------------

def _chol(cov):
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        d = cov.shape[0]
        return np.linalg.cholesky(cov + GAUSS_REG * max(1.0, np.trace(cov) / d) * np.eye(d))


def _gauss_logpdf(Z, mean, cov):
    L = _chol(cov)
    y = np.linalg.solve(L, (Z - mean).T)
    return -0.5 * np.sum(y * y, axis=0) - np.sum(np.log(np.diag(L))) - 0.5 * len(mean) * LOG_2PI


def _sqrt_psd(cov):
    vals, vecs = np.linalg.eigh(cov)
    return vecs * np.sqrt(np.clip(vals, 0.0, None))


def _as_rows(w, dim):
    w = np.asarray(w, dtype=float)
    single = w.ndim == 1
    w = np.atleast_2d(w)
    if w.shape[1] != dim:
        raise DomainError(f"expected weight vectors of length {dim}")
    if not np.all(np.isfinite(w)):
        raise DomainError("weights must be finite")
    return w, single


# -- models -------------------------------------------------------------------

@dataclass(frozen=True)
class GaussianModel:
    mean_z: np.ndarray
    cov_z: np.ndarray
    scaler: Scaler
    training_seed: int = 0
    kind = "gaussian"

    @property
    def dim(self) -> int:
        return len(self.mean_z)

    @property
    def mean(self):
        return self.scaler.inverse(self.mean_z)

    @property
    def covariance(self):
        s = self.scaler.scale
        return self.cov_z * np.outer(s, s)

    @classmethod
    def from_moments(cls, mean, cov, seed: int = 0) -> "GaussianModel":
        mean = np.asarray(mean, dtype=float)
        return cls(mean, np.asarray(cov, dtype=float), Scaler.identity(len(mean)), seed)

    def _log_density_z(self, Z):
        return _gauss_logpdf(Z, self.mean_z, self.cov_z)

    def _sample_z(self, n, rng):
        return self.mean_z + rng.standard_normal((n, self.dim)) @ _sqrt_psd(self.cov_z).T

    def params(self):
        return {"mean_z": self.mean_z, "cov_z": self.cov_z}


@dataclass(frozen=True)
class GmmModel:
    weights: np.ndarray
    means_z: np.ndarray  # n_m x n_c
    covs_z: np.ndarray  # n_m x n_c x n_c
    scaler: Scaler
    training_seed: int = 0
    kind = "gmm"

    def __post_init__(self):
        if abs(float(np.sum(self.weights)) - 1.0) > 1e-10:
            raise DomainError("mixture weights must sum to 1")

    @property
    def dim(self) -> int:
        return self.means_z.shape[1]

    @property
    def n_m(self) -> int:
        return len(self.weights)

    def components(self):
        """(weight, mean, covariance) triples in original units."""
        s = self.scaler.scale
        return [(float(p), self.scaler.inverse(m), c * np.outer(s, s))
                for p, m, c in zip(self.weights, self.means_z, self.covs_z)]

    def _component_logpdf(self, Z):
        return np.stack([np.log(p) + _gauss_logpdf(Z, m, c) if p > 0 else np.full(len(Z), -np.inf)
                         for p, m, c in zip(self.weights, self.means_z, self.covs_z)], axis=1)

    def _log_density_z(self, Z):
        return _logsumexp(self._component_logpdf(Z))

    def _sample_z(self, n, rng):
        comp = rng.choice(self.n_m, size=n, p=self.weights)
        eps = rng.standard_normal((n, self.dim))
        out = np.empty((n, self.dim))
        for k in range(self.n_m):
            sel = comp == k
            out[sel] = self.means_z[k] + eps[sel] @ _sqrt_psd(self.covs_z[k]).T
        return out

    def params(self):
        return {"weights": self.weights, "means_z": self.means_z, "covs_z": self.covs_z}


def _logsumexp(a):
    m = np.max(a, axis=1, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    return (m + np.log(np.sum(np.exp(a - m), axis=1, keepdims=True)))[:, 0]


# -- masked affine autoregressive flow ----------------------------------------

@dataclass(frozen=True)
class FlowArch:
    dim: int
    n_flows: int = 5
    hidden_width: int = 0  # 0 means 2 * dim

    @property
    def width(self) -> int:
        return self.hidden_width or 2 * self.dim

    def ranks(self, k: int) -> np.ndarray:
        """Autoregressive rank of each input in flow ``k``; orderings alternate."""
        r = np.arange(self.dim)
        return r if k % 2 == 0 else r[::-1].copy()

    def masks(self, k: int):
        d, H = self.dim, self.width
        rank = self.ranks(k)
        deg = np.arange(H) % (d - 1) if d > 1 else np.full(H, -1)
        m_in = (deg[:, None] >= rank[None, :]).astype(float)  # H x d
        m_out = (rank[:, None] > deg[None, :]).astype(float)  # d x H
        return m_in, m_out

    def shapes(self):
        d, H = self.dim, self.width
        return [("W1", (H, d)), ("b1", (H,)), ("Wm", (d, H)), ("bm", (d,)), ("Wa", (d, H)), ("ba", (d,))]

    @property
    def n_params(self) -> int:
        return self.n_flows * sum(int(np.prod(s)) for _, s in self.shapes())

    @property
    def n_free_params(self) -> int:
        total = 0
        for k in range(self.n_flows):
            m_in, m_out = self.masks(k)
            total += int(m_in.sum()) + self.width + 2 * int(m_out.sum()) + 2 * self.dim
        return total

    def unpack(self, theta):
        out, i = [], 0
        for _ in range(self.n_flows):
            layer = {}
            for name, shape in self.shapes():
                n = int(np.prod(shape))
                layer[name] = theta[i:i + n].reshape(shape)
                i += n
            out.append(layer)
        return out

    def init_params(self, rng) -> np.ndarray:
        """Random input layer, zero output layer: every flow starts as the identity."""
        theta = np.zeros(self.n_params)
        for k, layer in enumerate(self.unpack(theta)):
            m_in, _ = self.masks(k)
            fan_in = np.maximum(m_in.sum(axis=1, keepdims=True), 1.0)
            layer["W1"][...] = rng.standard_normal(layer["W1"].shape) / np.sqrt(fan_in) * m_in
        return theta


def _layer_forward(p, m_in, m_out, h):
    s = np.tanh(h @ (p["W1"] * m_in).T + p["b1"])
    mu = s @ (p["Wm"] * m_out).T + p["bm"]
    alpha = s @ (p["Wa"] * m_out).T + p["ba"]
    return s, mu, alpha


def flow_to_base(arch: FlowArch, theta, X):
    """Data -> base direction (parallel). Returns (z, log|det dz/dx|)."""
    h = np.asarray(X, dtype=float)
    logdet = np.zeros(len(h))
    for k, p in enumerate(arch.unpack(theta)):
        m_in, m_out = arch.masks(k)
        _, mu, alpha = _layer_forward(p, m_in, m_out, h)
        h = (h - mu) * np.exp(-alpha)
        logdet -= alpha.sum(axis=1)
    return h, logdet


def flow_from_base(arch: FlowArch, theta, Z):
    """Base -> data direction; each flow is solved one autoregressive rank at a time."""
    u = np.asarray(Z, dtype=float)
    layers = arch.unpack(theta)
    for k in reversed(range(arch.n_flows)):
        m_in, m_out = arch.masks(k)
        rank = arch.ranks(k)
        h = np.zeros_like(u)
        for r in range(arch.dim):
            i = int(np.flatnonzero(rank == r)[0])
            _, mu, alpha = _layer_forward(layers[k], m_in, m_out, h)
            h[:, i] = u[:, i] * np.exp(alpha[:, i]) + mu[:, i]
        u = h
    return u


def flow_nll_and_grad(arch: FlowArch, theta, X):
    """Mean negative log-likelihood (z-space) and its analytic gradient."""
    X = np.asarray(X, dtype=float)
    n, d = X.shape
    layers = arch.unpack(theta)
    cache = []
    h = X
    nll = np.zeros(n)
    for k, p in enumerate(layers):
        m_in, m_out = arch.masks(k)
        s, mu, alpha = _layer_forward(p, m_in, m_out, h)
        e = np.exp(-alpha)
        u = (h - mu) * e
        cache.append((h, s, e, u))
        nll += alpha.sum(axis=1)
        h = u
    nll += 0.5 * np.sum(h * h, axis=1) + 0.5 * d * LOG_2PI
    grad = np.zeros_like(theta)
    glayers = arch.unpack(grad)
    g = h / n  # dL/dz
    for k in reversed(range(arch.n_flows)):
        p, gp = layers[k], glayers[k]
        m_in, m_out = arch.masks(k)
        h_in, s, e, u = cache[k]
        g_mu = -g * e
        g_alpha = -g * u + 1.0 / n
        gp["Wm"][...] = (g_mu.T @ s) * m_out
        gp["bm"][...] = g_mu.sum(axis=0)
        gp["Wa"][...] = (g_alpha.T @ s) * m_out
        gp["ba"][...] = g_alpha.sum(axis=0)
        g_s = g_mu @ (p["Wm"] * m_out) + g_alpha @ (p["Wa"] * m_out)
        g_a1 = g_s * (1.0 - s * s)
        gp["W1"][...] = (g_a1.T @ h_in) * m_in
        gp["b1"][...] = g_a1.sum(axis=0)
        g = g * e + g_a1 @ (p["W1"] * m_in)
    return float(nll.mean()), grad


@dataclass(frozen=True)
class FlowModel:
    arch: FlowArch
    theta: np.ndarray
    scaler: Scaler
    training_seed: int = 0
    kind = "nf"

    @property
    def dim(self) -> int:
        return self.arch.dim

    @property
    def n_flows(self) -> int:
        return self.arch.n_flows

    @property
    def hidden_width(self) -> int:
        return self.arch.width

    def forward(self, Z):
        """Base samples -> z-scored weights."""
        return flow_from_base(self.arch, self.theta, Z)

    def inverse(self, X):
        """z-scored weights -> base samples."""
        return flow_to_base(self.arch, self.theta, X)[0]

    def _log_density_z(self, Z):
        u, logdet = flow_to_base(self.arch, self.theta, Z)
        return -0.5 * np.sum(u * u, axis=1) - 0.5 * self.dim * LOG_2PI + logdet

    def _sample_z(self, n, rng):
        return self.forward(rng.standard_normal((n, self.dim)))

    def params(self):
        return {"n_flows": self.arch.n_flows, "hidden_width": self.arch.width, "theta": self.theta}


LatentModel = GaussianModel | GmmModel | FlowModel


def log_density(model, w):
    """Log-pdf of weight vector(s) ``w`` in original units."""
    Wr, single = _as_rows(w, model.dim)
    out = model._log_density_z(model.scaler.transform(Wr)) + model.scaler.log_det
    return float(out[0]) if single else out


def sample(model, n: int, seed) -> np.ndarray:
    """``n`` i.i.d. weight draws in original units; bit-identical for a given seed."""
    if n < 1:
        raise DomainError("n must be at least 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return model.scaler.inverse(model._sample_z(n, rng))


# -- fitting ------------------------------------------------------------------

def _check_data(W, min_rows=None):
    W = np.asarray(W, dtype=float)
    if W.ndim != 2 or not np.all(np.isfinite(W)):
        raise DomainError("weight matrix must be a finite 2-D array")
    n, d = W.shape
    if n <= (d if min_rows is None else min_rows - 1):
        raise InsufficientDataError(f"need more than {d} rows to fit {d}-dimensional weights, got {n}")
    return W


def fit_gaussian(W, seed: int = 0):
    """Closed-form maximum-likelihood fit (divisor n), regularized by 1e-9 I.

    Two rows are enough; fewer rows than dimensions leave a rank-deficient
    covariance that the regularization keeps invertible.
    """
    W = _check_data(W, min_rows=2)
    sc = Scaler.fit(W)
    Z = sc.transform(W)
    mean = Z.mean(axis=0)
    cov = np.atleast_2d(np.cov(Z, rowvar=False, ddof=0))
    if np.linalg.matrix_rank(cov) < cov.shape[0]:
        log.warning("weight covariance is rank deficient; relying on regularization")
    cov = cov + GAUSS_REG * np.eye(len(mean))
    model = GaussianModel(mean, cov, sc, seed)
    nll = -float(np.mean(log_density(model, W)))
    return model, FitReport("gaussian", param_count_gaussian(W.shape[1]), [], nll, 1)


@dataclass(frozen=True)
class GmmConfig:
    n_restarts: int = 5
    tol: float = 1e-6
    max_iter: int = 500
    reg: float = 1e-8
    max_components: int | None = None  # None: from the 15-per-parameter rule


class _Degenerate(Exception):
    pass


def _outer_rows(Z):
    n, d = Z.shape
    return (Z[:, :, None] * Z[:, None, :]).reshape(n, d * d)


def _m_step(Z, ZZ, R, reg):
    # R is n_m x n; second moments via z z^T rows keep each step to a few BLAS products
    n, d = Z.shape
    nk = R.sum(axis=1)
    if np.any(nk < 1e-8 * n):
        raise _Degenerate("empty component")
    means = (R @ Z) / nk[:, None]
    covs = (R @ ZZ).reshape(-1, d, d) / nk[:, None, None] - means[:, :, None] * means[:, None, :]
    covs = 0.5 * (covs + covs.transpose(0, 2, 1)) + reg * np.eye(d)
    if np.min(np.linalg.eigvalsh(covs)) <= 2 * reg:
        raise _Degenerate("collapsed covariance")
    return nk / n, means, covs


def _mixture_logpdf(Z, ZZ, w, means, covs):
    """n_m x n matrix of log(w_k) + log N(z | mean_k, cov_k)."""
    n, d = Z.shape
    prec = np.linalg.inv(covs)
    pm = np.einsum("kde,ke->kd", prec, means)
    const = np.log(w) - 0.5 * (np.sum(pm * means, axis=1) + np.linalg.slogdet(covs)[1] + d * LOG_2PI)
    return (prec.reshape(-1, d * d) @ ZZ.T) * -0.5 + pm @ Z.T + const[:, None]


def em_fit(Z, n_m: int, rng, cfg: GmmConfig = GmmConfig()):
    """One EM run from a random hard-assignment start. Returns (weights, means, covs, history)."""
    n = len(Z)
    centers = Z[rng.choice(n, size=n_m, replace=False)]
    nearest = np.argmin(((Z[:, None, :] - centers[None]) ** 2).sum(axis=2), axis=1)
    R = np.zeros((n_m, n))
    R[nearest, np.arange(n)] = 1.0
    ZZ = _outer_rows(Z)
    history = []
    for _ in range(cfg.max_iter):
        w, means, covs = _m_step(Z, ZZ, R, cfg.reg)
        lp = _mixture_logpdf(Z, ZZ, w, means, covs)
        top = lp.max(axis=0)
        E = np.exp(lp - top)
        norm = E.sum(axis=0)
        history.append(float(np.mean(top + np.log(norm))))
        R = E / norm
        if len(history) > 1 and abs(history[-1] - history[-2]) < cfg.tol:
            break
    return w, means, covs, history


def fit_gmm(W, n_tr: int | None = None, seed: int = 0, cfg: GmmConfig = GmmConfig()):
    """EM fits for n_m = 1..max_components, keeping the size with the lowest BIC."""
    W = _check_data(W)
    n, d = W.shape
    n_tr = n if n_tr is None else n_tr
    sc = Scaler.fit(W)
    Z = sc.transform(W)
    top = cfg.max_components or max_components(n_tr, d)
    if top == 1 and not cfg.max_components:
        log.warning("only %d training rows for %d weights: mixture size clamped to 1", n_tr, d)
    rng = np.random.default_rng(seed)
    curve, best, notes, total_iter = [], None, [], 0
    for n_m in range(1, top + 1):
        runs = []
        for _ in range(cfg.n_restarts if n_m > 1 else 1):
            try:
                runs.append(em_fit(Z, n_m, rng, cfg))
            except _Degenerate as exc:
                notes.append(f"n_m={n_m}: restart discarded ({exc})")
        if not runs:
            notes.append(f"n_m={n_m}: all restarts degenerate; sweep stopped")
            log.warning("GMM with %d components degenerate on every restart; keeping fewer", n_m)
            break
        w, means, covs, hist = max(runs, key=lambda r: r[3][-1])
        total_iter += sum(len(r[3]) for r in runs)
        lnl = n * (hist[-1] + sc.log_det)
        n_p = param_count_gmm(n_m, d)
        bic = n_p * math.log(n_tr) - 2.0 * lnl
        curve.append((n_m, bic))
        if best is None or bic < best[0]:
            best = (bic, n_m, w, means, covs, lnl)
    _, n_m, w, means, covs, lnl = best
    model = GmmModel(w / w.sum(), means, covs, sc, seed)
    return model, FitReport("gmm", param_count_gmm(n_m, d), curve, -lnl / n, total_iter, notes)


@dataclass(frozen=True)
class FlowConfig:
    n_flows: int = 5
    hidden_width: int = 0  # 0 means 2 * n_c
    optimizer: str = "momentum"  # or "adam"
    learning_rate: float = 1e-3
    momentum: float = 0.9
    batch_size: int = 256
    full_batch_below: int = 512
    max_epochs: int = 2000
    patience: int = 50
    val_frac: float = 0.1
    max_lr_halvings: int = 3

    def __post_init__(self):
        if self.optimizer not in ("momentum", "adam"):
            raise DomainError(f"unknown optimizer {self.optimizer!r}")

    @classmethod
    def from_dict(cls, d):
        return cls(**(d or {}))


class _Diverged(Exception):
    pass


def _train_flow(arch, Z_tr, Z_val, rng, cfg: FlowConfig, lr: float):
    theta = arch.init_params(rng)
    vel = np.zeros_like(theta)
    m2 = np.zeros_like(theta)
    step = 0
    n = len(Z_tr)
    batch = n if n < cfg.full_batch_below else cfg.batch_size
    best_val = flow_nll_and_grad(arch, theta, Z_val)[0] if len(Z_val) else math.inf
    best_theta, best_epoch, epoch = theta.copy(), 0, 0
    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(n)
        for i in range(0, n, batch):
            loss, g = flow_nll_and_grad(arch, theta, Z_tr[order[i:i + batch]])
            if not (math.isfinite(loss) and np.all(np.isfinite(g))):
                raise _Diverged(f"non-finite loss at epoch {epoch}")
            step += 1
            if cfg.optimizer == "adam":
                vel = 0.9 * vel + 0.1 * g
                m2 = 0.999 * m2 + 0.001 * g * g
                theta = theta - lr * (vel / (1 - 0.9 ** step)) / (np.sqrt(m2 / (1 - 0.999 ** step)) + 1e-8)
            else:
                vel = cfg.momentum * vel - lr * g
                theta = theta + vel
        if len(Z_val):
            val = flow_nll_and_grad(arch, theta, Z_val)[0]
            if not math.isfinite(val):
                raise _Diverged(f"non-finite validation loss at epoch {epoch}")
            if val < best_val:
                best_val, best_theta, best_epoch = val, theta.copy(), epoch
            elif epoch - best_epoch >= cfg.patience:
                break
        else:
            best_theta, best_epoch = theta.copy(), epoch
    return best_theta, epoch


def fit_nf(W, seed: int = 0, cfg: FlowConfig = FlowConfig()):
    """Maximum-likelihood training with early stopping on a held-out 10% slice."""
    W = _check_data(W)
    n, d = W.shape
    if n < 50:
        log.warning("only %d training rows for a normalizing flow; expect a poor fit", n)
    sc = Scaler.fit(W)
    Z = sc.transform(W)
    arch = FlowArch(d, cfg.n_flows, cfg.hidden_width)
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    n_val = int(round(cfg.val_frac * n)) if n >= 20 else 0
    Z_val, Z_tr = Z[perm[:n_val]], Z[perm[n_val:]]
    lr, notes = cfg.learning_rate, []
    for attempt in range(cfg.max_lr_halvings + 1):
        try:
            theta, epochs = _train_flow(arch, Z_tr, Z_val, np.random.default_rng([seed, attempt]), cfg, lr)
            break
        except _Diverged as exc:
            notes.append(f"lr={lr:g}: {exc}")
            log.warning("flow training diverged (%s); halving learning rate", exc)
            lr /= 2.0
    else:
        raise TrainingDivergedError("flow training diverged after %d learning-rate halvings; %s"
                                    % (cfg.max_lr_halvings, "; ".join(notes)))
    model = FlowModel(arch, theta, sc, seed)
    nll = -float(np.mean(log_density(model, W)))
    return model, FitReport("nf", arch.n_free_params, [], nll, epochs, notes)


MODEL_KINDS = ("gaussian", "gmm", "nf")


def fit_latent(kind: str, W, seed: int = 0, gmm: GmmConfig = GmmConfig(), nf: FlowConfig = FlowConfig()):
    if kind == "gaussian":
        return fit_gaussian(W, seed)
    if kind == "gmm":
        return fit_gmm(W, seed=seed, cfg=gmm)
    if kind == "nf":
        return fit_nf(W, seed, nf)
    raise DomainError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")


# -- serialization --------------------------------------------------------------

def model_to_dict(model) -> dict:
    return {"kind": model.kind, "dim": model.dim, "training_seed": model.training_seed,
            "scaler": model.scaler.to_dict(), "params": model.params()}


def model_from_dict(d):
    try:
        kind, p = d["kind"], d["params"]
        sc = Scaler.from_dict(d["scaler"])
        seed = int(d["training_seed"])
        if kind == "gaussian":
            m = GaussianModel(np.asarray(p["mean_z"], float), np.asarray(p["cov_z"], float), sc, seed)
        elif kind == "gmm":
            m = GmmModel(np.asarray(p["weights"], float), np.asarray(p["means_z"], float),
                         np.asarray(p["covs_z"], float), sc, seed)
        elif kind == "nf":
            arch = FlowArch(int(d["dim"]), int(p["n_flows"]), int(p["hidden_width"]))
            theta = np.asarray(p["theta"], float)
            if len(theta) != arch.n_params:
                raise ArtifactError("flow parameter vector has the wrong length")
            m = FlowModel(arch, theta, sc, seed)
        else:
            raise ArtifactError(f"unknown latent model kind {kind!r}")
    except (KeyError, TypeError, ValueError) as exc:
        raise ArtifactError(f"malformed latent model: {exc}") from None
    if m.dim != int(d["dim"]):
        raise ArtifactError("latent model dimension mismatch")
    return m


def save_model(path, model, report: FitReport | None = None) -> None:
    payload = {"model": model_to_dict(model), "report": report.to_dict() if report else None}
    save_artifact(path, "latent-model", payload)


def load_model(path):
    payload = load_artifact(path, "latent-model")
    rep = payload.get("report")
    return model_from_dict(payload["model"]), (FitReport.from_dict(rep) if rep else None)
