"""Relative-L2 training, Adam, and density sweeps."""
from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import autodiff as ad
from .geometry import attach_edge_attributes, build_radius_graph, default_radius
from .model import GolaConfig, forward, init_params
from .pdedata import Dataset, subsample

REL_EPS = 1e-12
CSV_COLUMNS = ("kind", "density", "train_size", "test_rel_l2", "seed")


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    epochs: int = 300
    batch_size: int = 4
    lr: float = 1e-3
    lr_decay: float = 0.5
    lr_decay_every: int = 100
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    train_size: int = 100
    test_size: int = 100
    train_density: int = 1000
    eval_densities: list = field(default_factory=lambda: [1000])

    def __post_init__(self):
        if not self.lr > 0:
            raise ValueError("learning rate must be positive")
        if self.epochs < 1 or self.batch_size < 1 or self.train_size < 1 or self.test_size < 0:
            raise ValueError("epochs, batch_size and train_size must be at least 1")
        self.eval_densities = [int(d) for d in self.eval_densities]

    def to_dict(self):
        return asdict(self)


@dataclass
class RunReport:
    kind: str
    pde_tag: str
    train_losses: list
    test_rel_l2: dict
    param_count: int
    wall_clock: float
    model_config: dict
    train_config: dict
    seed: int
    # the command-line config document, echoed unchanged when a run starts from one
    config: dict | None = None

    def csv_rows(self):
        return [{"kind": self.kind, "density": int(d), "train_size": self.train_config["train_size"],
                 "test_rel_l2": float(e), "seed": self.seed} for d, e in sorted(self.test_rel_l2.items())]

    def to_json(self):
        d = asdict(self)
        d["test_rel_l2"] = {str(k): v for k, v in self.test_rel_l2.items()}
        return json.dumps(d, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        d["test_rel_l2"] = {int(k): v for k, v in d["test_rel_l2"].items()}
        return cls(**d)

    def same_result(self, other):
        """Equality of everything except wall-clock time."""
        a, b = asdict(self), asdict(other)
        a.pop("wall_clock")
        b.pop("wall_clock")
        return a == b


def write_csv(rows, path=None):
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({**r, "test_rel_l2": format(r["test_rel_l2"], ".9g")})
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


def read_csv(path_or_text):
    text = path_or_text
    if "\n" not in path_or_text:
        with open(path_or_text) as fh:
            text = fh.read()
    rows = []
    for r in csv.DictReader(io.StringIO(text)):
        rows.append({"kind": r["kind"], "density": int(r["density"]), "train_size": int(r["train_size"]),
                     "test_rel_l2": float(r["test_rel_l2"]), "seed": int(r["seed"])})
    return rows


# --------------------------------------------------------------------- loss

def relative_l2(pred, truth):
    """``|truth - pred| / (|truth| + 1e-12)``; Tensors in, Tensor out."""
    for x in (pred, truth):
        if not np.all(np.isfinite(ad.as_tensor(x).data)):
            raise FloatingPointError("relative_l2: non-finite input")
    if not isinstance(pred, ad.Tensor) and not isinstance(truth, ad.Tensor):
        pred, truth = np.asarray(pred, np.float64), np.asarray(truth, np.float64)
        return float(np.linalg.norm(truth - pred) / (np.linalg.norm(truth) + REL_EPS))
    pred, truth = ad._pair(pred, truth)
    num = ad.sqrt(ad.sum(ad.square(truth - pred)))
    den = ad.sqrt(ad.sum(ad.square(truth))) + REL_EPS
    return num / den


# -------------------------------------------------------------------- adam

@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0


def adam_step(params, grads, state: AdamState, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
    """One bias-corrected Adam update, in place on ``params``."""
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise TrainingError(f"non-finite gradient for parameter {name!r}")
    state.t += 1
    c1 = 1.0 - beta1 ** state.t
    c2 = 1.0 - beta2 ** state.t
    for name, p in params.items():
        g = grads[name]
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        v = state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p.data -= (lr * (m / c1) / (np.sqrt(v / c2) + eps)).astype(p.data.dtype)
    return params, state


# ----------------------------------------------------------------- samples

@dataclass
class Sample:
    coords: np.ndarray
    f: np.ndarray
    u: np.ndarray
    graph: object


def _derive_seed(*parts):
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1, np.uint64)[0] >> 1)


def make_sample(dataset: Dataset, index, density, seed, config: GolaConfig):
    """Subsample pair ``index`` and build its normalised graph sample."""
    meta = dataset.metadata
    pts, f, u = subsample(dataset.pair(index), density, seed)
    f = (f.astype(np.float64) - meta.get("f_mean", 0.0)) / (meta.get("f_std", 1.0) or 1.0)
    u = u.astype(np.float64) / (meta.get("u_std", 1.0) or 1.0)
    radius = config.radius if config.radius is not None else default_radius(density, config.target_degree)
    graph = attach_edge_attributes(build_radius_graph(pts, radius), pts, f)
    dt = config.dtype
    graph.edge_attr = graph.edge_attr.astype(dt)
    return Sample(pts.coords.astype(dt), f.astype(dt)[:, None], u.astype(dt)[:, None], graph)


def train_samples(dataset, tcfg: TrainConfig, gcfg: GolaConfig):
    return [make_sample(dataset, k, tcfg.train_density, _derive_seed(tcfg.seed, 0, tcfg.train_density, k), gcfg)
            for k in range(tcfg.train_size)]


def test_samples(dataset, tcfg: TrainConfig, gcfg: GolaConfig, density):
    start = tcfg.train_size
    return [make_sample(dataset, k, density, _derive_seed(tcfg.seed, 1, density, k), gcfg)
            for k in range(start, start + tcfg.test_size)]


def batch_loss(kind, params, samples):
    total = None
    for s in samples:
        err = relative_l2(forward(kind, params, s.coords, s.f, s.graph), s.u)
        total = err if total is None else total + err
    return total * (1.0 / len(samples))


def evaluate(kind, params, samples):
    """Mean relative L2 over ``samples`` (no gradient tracking)."""
    frozen = ad.ParamStore({n: a for n, a in params.arrays().items()})
    for _, t in frozen.items():
        t.requires_grad = False
    errs = [relative_l2(forward(kind, frozen, s.coords, s.f, s.graph).data, s.u) for s in samples]
    return float(np.mean(errs))


def train_params(kind, samples, gcfg: GolaConfig, tcfg: TrainConfig, params=None, log=None):
    """Optimise a fresh (or given) parameter set; returns ``(params, epoch_losses)``."""
    if params is None:
        params = init_params(kind, gcfg, c_in=samples[0].f.shape[1])
    rng = np.random.Generator(np.random.PCG64(_derive_seed(tcfg.seed, 2)))
    state = AdamState()
    losses = []
    for epoch in range(tcfg.epochs):
        lr = tcfg.lr * tcfg.lr_decay ** (epoch // tcfg.lr_decay_every)
        order = rng.permutation(len(samples))
        running = 0.0
        for start in range(0, len(order), tcfg.batch_size):
            batch = [samples[k] for k in order[start:start + tcfg.batch_size]]
            try:
                loss, grads = ad.forward_backward(lambda p: batch_loss(kind, p, batch), params)
                if not np.isfinite(loss):
                    raise FloatingPointError("non-finite loss")
                adam_step(params, grads, state, lr, tcfg.beta1, tcfg.beta2, tcfg.eps)
            except (FloatingPointError, TrainingError) as exc:
                raise TrainingError(f"epoch {epoch}: {exc}") from exc
            running += loss * len(batch)
        losses.append(running / len(samples))
        if log is not None:
            log(epoch, losses[-1])
    return params, losses


def fit(dataset: Dataset, kind, gcfg: GolaConfig, tcfg: TrainConfig, log=None, return_params=False):
    """Train on the first ``train_size`` pairs, test on the next ``test_size``."""
    if len(dataset) < tcfg.train_size + tcfg.test_size:
        raise ValueError(f"dataset has {len(dataset)} pairs, need {tcfg.train_size + tcfg.test_size}")
    t0 = time.perf_counter()
    samples = train_samples(dataset, tcfg, gcfg)
    params, losses = train_params(kind, samples, gcfg, tcfg, log=log)
    errors = {}
    for d in tcfg.eval_densities:
        errors[int(d)] = evaluate(kind, params, test_samples(dataset, tcfg, gcfg, d)) if tcfg.test_size else float("nan")
    report = RunReport(kind, dataset.pde_tag, [float(x) for x in losses], errors, params.count(),
                       time.perf_counter() - t0, gcfg.to_dict(), tcfg.to_dict(), tcfg.seed)
    return (report, params) if return_params else report


def _sweep_one(args):
    dataset, kind, density, gcfg, tcfg = args
    cfg = TrainConfig(**{**tcfg.to_dict(), "train_density": density, "eval_densities": [density]})
    return fit(dataset, kind, gcfg, cfg)


def density_sweep(dataset: Dataset, kinds, densities, gcfg: GolaConfig, tcfg: TrainConfig, jobs=1):
    """One fit per ``(kind, density)``, trained and tested at that density."""
    tasks = [(dataset, k, int(d), gcfg, tcfg) for k in kinds for d in densities]
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(jobs) as pool:
            return list(pool.map(_sweep_one, tasks))
    return [_sweep_one(t) for t in tasks]


def sweep_rows(reports):
    return [row for r in reports for row in r.csv_rows()]
