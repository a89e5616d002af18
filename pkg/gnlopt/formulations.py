"""Plain-text dumps of the bilinear programs behind the solvers."""

from __future__ import annotations

from collections.abc import Iterable

import numpy as np

from .models import GnlModel, LinearConstraintSet, MgnlModel, NestStructure, check_beta
from .pricing import PriceBounds, cp_beta
from .reformulate import variable_bounds


def _num(value: float) -> str:
    return f"{value:.10g}"


def _linear(terms: Iterable[tuple[float, str]]) -> str:
    parts = []
    for coef, name in terms:
        if coef == 0.0:
            continue
        sign = "-" if coef < 0.0 else "+"
        magnitude = abs(coef)
        parts.append(f"{sign} {name}" if magnitude == 1.0 else f"{sign} {_num(magnitude)} {name}")
    if not parts:
        return "0"
    text = " ".join(parts)
    return text[2:] if text.startswith("+ ") else text


class _Listing:
    """Sectioned text with one named row per line."""

    def __init__(self, title: str) -> None:
        self.lines = [f"\\ {title}"]

    def section(self, name: str) -> None:
        self.lines.append(name)

    def row(self, label: str, text: str) -> None:
        self.lines.append(f" {label}: {text}")

    def text(self) -> str:
        return "\n".join(self.lines) + "\n"


def _assortment_rows(listing: _Listing, constraints: LinearConstraintSet | None, names: list[str]) -> None:
    if constraints is None:
        return
    for r, (coefficients, bound) in enumerate(zip(constraints.a, constraints.b)):
        listing.row(f"assort[{r}]", f"{_linear(zip(coefficients, names))} <= {_num(float(bound))}")


def _inclusive_rows(listing: _Listing, model: GnlModel, tag: str) -> None:
    for n in range(model.n_nests):
        terms = [(-float(model.weights[i, n]), f"x[{i}]") for i in range(model.m)]
        listing.row(f"inclusive[{tag}{n}]", f"{_linear([(1.0, f'W[{tag}{n}]'), *terms])} = {_num(float(model.v0[n]))}")


def format_gnl_bis(model: GnlModel, constraints: LinearConstraintSet | None, beta: float, delta: float) -> str:
    """Return the bisection subproblem at delta with McCormick rows and nonlinear rows spelled out."""
    check_beta(model.r, beta)
    bounds = variable_bounds(model, beta)
    listing = _Listing(f"bisection subproblem: beta={_num(beta)} delta={_num(delta)}")
    objective = [(beta * float(model.v0[n]), f"h[{n}]") for n in range(model.n_nests)]
    for n in range(model.n_nests):
        for i in np.flatnonzero(model.weights[:, n] > 0.0):
            objective.append((float(model.weights[i, n]) * (beta - float(model.r[i])), f"s[{n},{i}]"))
    objective.extend((-delta, f"k[{n}]") for n in range(model.n_nests))
    listing.section("minimize")
    listing.row("obj", _linear(objective))
    listing.section("subject to")
    _inclusive_rows(listing, model, "")
    for n in range(model.n_nests):
        sigma = float(model.sigma[n])
        listing.row(f"oa_h[{n}]", f"h[{n}] >= W[{n}]^({_num(sigma - 1.0)})")
        listing.row(f"oa_k[{n}]", f"k[{n}] <= W[{n}]^({_num(sigma)})")
        lo, hi = float(bounds.h_lo[n]), float(bounds.h_hi[n])
        for i in np.flatnonzero(model.weights[:, n] > 0.0):
            s, x, h = f"s[{n},{i}]", f"x[{i}]", f"h[{n}]"
            listing.row(f"mc1[{n},{i}]", f"{_linear([(1.0, s), (-lo, x)])} >= 0")
            listing.row(f"mc2[{n},{i}]", f"{_linear([(1.0, s), (-hi, x)])} <= 0")
            listing.row(f"mc3[{n},{i}]", f"{_linear([(1.0, s), (-1.0, h), (-hi, x)])} >= {_num(-hi)}")
            listing.row(f"mc4[{n},{i}]", f"{_linear([(1.0, s), (-1.0, h), (-lo, x)])} <= {_num(-lo)}")
    _assortment_rows(listing, constraints, [f"x[{i}]" for i in range(model.m)])
    listing.section("bounds")
    for n in range(model.n_nests):
        listing.row(f"W[{n}]", f"[{_num(float(bounds.w_lo[n]))}, {_num(float(bounds.w_hi[n]))}]")
        listing.row(f"h[{n}]", f"[{_num(float(bounds.h_lo[n]))}, {_num(float(bounds.h_hi[n]))}]")
        listing.row(f"k[{n}]", f"[{_num(float(bounds.k_lo[n]))}, {_num(float(bounds.k_hi[n]))}]")
    listing.section("binary")
    listing.row("x", " ".join(f"x[{i}]" for i in range(model.m)))
    return listing.text()


def format_mgnl_bi(mixed: MgnlModel, constraints: LinearConstraintSet | None, beta: float) -> str:
    """Return the mixed bilinear program: one ratio row per segment and k = W h links."""
    listing = _Listing(f"mixed bilinear program: beta={_num(beta)} segments={mixed.n_segments}")
    listing.section("minimize")
    listing.row("obj", _linear((float(theta), f"delta[{t}]") for t, theta in enumerate(mixed.theta)))
    listing.section("subject to")
    for t, segment in enumerate(mixed.segments):
        check_beta(segment.r, beta)
        numerator = []
        for n in range(segment.n_nests):
            inner = [f"{_num(beta * float(segment.v0[n]))}"]
            inner.extend(
                f"{_num(float(segment.weights[i, n]) * (beta - float(segment.r[i])))} x[{i}]"
                for i in np.flatnonzero(segment.weights[:, n] > 0.0)
            )
            numerator.append(f"h[{t},{n}] ({' + '.join(inner)})")
        denominator = " + ".join(f"k[{t},{n}]" for n in range(segment.n_nests))
        listing.row(f"ratio[{t}]", f"{' + '.join(numerator)} = delta[{t}] ({denominator})")
        _inclusive_rows(listing, segment, f"{t},")
        for n in range(segment.n_nests):
            sigma = float(segment.sigma[n])
            listing.row(f"link[{t},{n}]", f"k[{t},{n}] = W[{t},{n}] h[{t},{n}]")
            listing.row(f"oa_h[{t},{n}]", f"h[{t},{n}] >= W[{t},{n}]^({_num(sigma - 1.0)})")
            listing.row(f"oa_k[{t},{n}]", f"k[{t},{n}] <= W[{t},{n}]^({_num(sigma)})")
    _assortment_rows(listing, constraints, [f"x[{i}]" for i in range(mixed.m)])
    listing.section("binary")
    listing.row("x", " ".join(f"x[{i}]" for i in range(mixed.m)))
    return listing.text()


def format_cp_gnl_bi(
    structure: NestStructure,
    bounds: PriceBounds,
    constraints: LinearConstraintSet | None = None,
    beta: float | None = None,
) -> str:
    """Return the continuous-price bilinear program with w_in = (kappa_i - eta_i y_i) / sigma_n."""
    level = cp_beta(bounds) if beta is None else beta
    if not level > float(bounds.upper.max()):
        raise ValueError(f"beta={level!r} must exceed every upper price bound")
    m, n_nests = structure.m, structure.n_nests
    members = [np.flatnonzero(structure.alpha[:, n] > 0.0) for n in range(n_nests)]
    listing = _Listing(f"continuous-price bilinear program: beta={_num(level)}")
    listing.section("minimize")
    listing.row("obj", "delta")
    listing.section("subject to")
    numerator = []
    for n in range(n_nests):
        inner = [_num(level * float(structure.v0[n]))]
        inner.extend(f"{_num(float(structure.alpha[i, n]))} s[{i},{n}]" for i in members[n])
        numerator.append(f"h[{n}] ({' + '.join(inner)})")
    listing.row("ratio", f"{' + '.join(numerator)} <= delta ({' + '.join(f'k[{n}]' for n in range(n_nests))})")
    for i in range(m):
        for n in np.flatnonzero(structure.alpha[i] > 0.0):
            sigma = float(structure.sigma[n])
            listing.row(f"s[{i},{n}]", f"s[{i},{n}] = x[{i}] u[{i},{n}]")
            listing.row(f"u[{i},{n}]", f"u[{i},{n}] = ({_num(level)} - y[{i}]) t[{i},{n}]")
            listing.row(
                f"w[{i},{n}]",
                f"w[{i},{n}] = ({_num(float(bounds.kappa[i]))} - {_num(float(bounds.eta[i]))} y[{i}]) / {_num(sigma)}",
            )
            listing.row(f"t[{i},{n}]", f"t[{i},{n}] = exp(w[{i},{n}])")
    for n in range(n_nests):
        sigma = float(structure.sigma[n])
        terms = " + ".join(f"{_num(float(structure.alpha[i, n]))} x[{i}] t[{i},{n}]" for i in members[n])
        listing.row(f"inclusive[{n}]", f"W[{n}] = {_num(float(structure.v0[n]))}" + (f" + {terms}" if terms else ""))
        listing.row(f"oa_h[{n}]", f"h[{n}] >= W[{n}]^({_num(sigma - 1.0)})")
        listing.row(f"oa_k[{n}]", f"k[{n}] <= W[{n}]^({_num(sigma)})")
        listing.row(f"link[{n}]", f"k[{n}] = W[{n}] h[{n}]")
    if constraints is not None:
        names = [f"x[{i}]" for i in range(m)] + [f"y[{i}]" for i in range(m)]
        _assortment_rows(listing, constraints, names[: constraints.dim])
    listing.section("bounds")
    for i in range(m):
        listing.row(f"y[{i}]", f"[{_num(float(bounds.lower[i]))}, {_num(float(bounds.upper[i]))}]")
    listing.section("binary")
    listing.row("x", " ".join(f"x[{i}]" for i in range(m)))
    return listing.text()
