"""Trained models, prediction, and the text model file."""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .dataset import Dataset, SparseInstance, format_number, to_csr
from .kernels import KernelParams, kernel_block


class ModelFormatError(ValueError):
    pass


@dataclass
class SvmModel:
    params: KernelParams
    sv_indices: np.ndarray  # training-set index of each support vector
    sv: list[SparseInstance]
    coef: np.ndarray  # alpha_i * y_i, all nonzero
    rho: float
    labels: tuple[float, float]  # (label of +1 side, label of -1 side)

    @classmethod
    def from_solution(cls, ds: Dataset, alpha, y, rho, params, labels=(1.0, -1.0)) -> "SvmModel":
        sv = np.flatnonzero(alpha != 0)
        return cls(params, sv, [ds.instances[i] for i in sv], alpha[sv] * y[sv], float(rho), tuple(labels))

    def decision_function(self, instances) -> np.ndarray:
        X = _as_csr(instances)
        if not self.sv:
            return np.full(X.shape[0], -self.rho)
        S = to_csr(self.sv, max(1, max((s.indices[-1] for s in self.sv if s.indices), default=1)))
        K = kernel_block(X, S, self.params)
        return K @ self.coef - self.rho

    def predict(self, instances) -> np.ndarray:
        dec = self.decision_function(instances)
        return np.where(dec >= 0, self.labels[0], self.labels[1])


@dataclass
class OneVsAllModel:
    models: list[SvmModel]
    multilabel: bool = False

    @property
    def labels(self) -> list[float]:
        return [m.labels[0] for m in self.models]

    def decision_matrix(self, instances) -> np.ndarray:
        return np.column_stack([m.decision_function(instances) for m in self.models])

    def predict(self, instances) -> np.ndarray:
        dec = self.decision_matrix(instances)
        return np.asarray(self.labels)[np.argmax(dec, axis=1)]

    def predict_label_sets(self, instances) -> list[tuple[float, ...]]:
        dec = self.decision_matrix(instances)
        labs = self.labels
        return [tuple(labs[k] for k in np.flatnonzero(row >= 0)) for row in dec]


def _as_csr(instances):
    if isinstance(instances, Dataset):
        return instances.csr()
    insts = list(instances)
    d = max((s.indices[-1] for s in insts if s.indices), default=1)
    return to_csr(insts, d)


def dumps_model(model: SvmModel | OneVsAllModel) -> str:
    models = model.models if isinstance(model, OneVsAllModel) else [model]
    if isinstance(model, OneVsAllModel):
        labels = model.labels
        nr_class = len(models)
    else:
        labels = list(model.labels)
        nr_class = 2
    params = models[0].params
    # union of support vectors, keyed by training index
    rows: dict[int, SparseInstance] = {}
    coefs: dict[int, list[float]] = {}
    for k, m in enumerate(models):
        for idx, inst, c in zip(m.sv_indices.tolist(), m.sv, m.coef.tolist()):
            rows[idx] = inst
            coefs.setdefault(idx, [0.0] * len(models))[k] = c
    out = io.StringIO()
    out.write("svm_type c_svc\n")
    out.write(f"kernel_type {params.kind}\n")
    out.write(f"gamma {format_number(params.gamma)}\n")
    out.write(f"coef0 {format_number(params.coef0)}\n")
    out.write(f"nr_class {nr_class}\n")
    out.write(f"total_sv {len(rows)}\n")
    out.write("rho " + " ".join(repr(float(m.rho)) for m in models) + "\n")
    out.write("label " + " ".join(format_number(l) for l in labels) + "\n")
    out.write("SV\n")
    for idx in sorted(rows):
        feats = " ".join(f"{j}:{format_number(v)}" for j, v in zip(rows[idx].indices, rows[idx].values))
        line = " ".join(repr(float(c)) for c in coefs[idx])
        out.write(f"{line} {feats}".rstrip() + "\n")
    return out.getvalue()


def loads_model(text: str, C: float = 1.0) -> SvmModel | OneVsAllModel:
    lines = text.splitlines()
    header: dict[str, list[str]] = {}
    k = 0
    while k < len(lines) and lines[k].strip() != "SV":
        toks = lines[k].split()
        if toks:
            header[toks[0]] = toks[1:]
        k += 1
    if k == len(lines):
        raise ModelFormatError("missing SV section")
    try:
        params = KernelParams(header["kernel_type"][0], float(header["gamma"][0]), float(header["coef0"][0]), C)
        rhos = [float(v) for v in header["rho"]]
        labels = [float(v) for v in header["label"]]
        total = int(header["total_sv"][0])
    except (KeyError, IndexError, ValueError) as exc:
        raise ModelFormatError(f"bad model header: {exc}") from None
    n_models = len(rhos)
    svs: list[SparseInstance] = []
    coefs = []
    for lineno, line in enumerate(lines[k + 1 :], start=k + 2):
        toks = line.split()
        if not toks:
            continue
        try:
            coefs.append([float(t) for t in toks[:n_models]])
            feats = {}
            for tok in toks[n_models:]:
                a, _, b = tok.partition(":")
                feats[int(a)] = float(b)
            svs.append(SparseInstance.from_dict(feats))
        except ValueError as exc:
            raise ModelFormatError(f"line {lineno}: bad support vector: {exc}") from None
    if len(svs) != total:
        raise ModelFormatError(f"expected {total} support vectors, found {len(svs)}")
    coef = np.asarray(coefs).reshape(len(svs), n_models)
    models = []
    for m in range(n_models):
        nz = np.flatnonzero(coef[:, m])
        labs = (labels[0], labels[1]) if n_models == 1 else (labels[m], float("nan"))
        models.append(SvmModel(params, nz, [svs[i] for i in nz], coef[nz, m], rhos[m], labs))
    if n_models == 1:
        return models[0]
    return OneVsAllModel(models)


def save_model(model, path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(dumps_model(model))


def load_model(path) -> SvmModel | OneVsAllModel:
    with open(path) as fh:
        return loads_model(fh.read())
