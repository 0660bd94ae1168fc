import argparse
import logging
import os
import sys

import numpy as np
import pandas as pd
import pydantic

import specfactors.divisors as divisors
import specfactors.factors as factors
import specfactors.io_utils as io_utils
import specfactors.report_templates as report_templates
import specfactors.spectral as spectral
import specfactors.statespace as ss
from specfactors.errors import ModelFileError, NotAFactor, NotMinimalFactor, SpectralFactorError
from specfactors.matnum import DEFAULT_TOLERANCES, ToleranceConfig

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_INVALID = 2
EXIT_PARSE = 3

EXAMPLE_TOLERANCE = 1e-10

SUMMARY_COLUMNS = [
    "index", "label", "file", "degree", "expected_degree", "divisor_degree",
    "complement_degree", "spectrum_residual", "poles", "zeros", "verdict",
]


def _tolerances(args: argparse.Namespace, model: io_utils.ModelFile | None) -> ToleranceConfig:
    """
    File tolerances, then command-line overrides.
    """
    base = model.tolerances if model is not None and model.tolerances else DEFAULT_TOLERANCES
    overrides = {}
    if args.tol is not None:
        overrides["residual_tol"] = args.tol
    if args.samples is not None:
        overrides["circle_samples"] = args.samples
    try:
        return ToleranceConfig(**{**base.model_dump(), **overrides})
    except pydantic.ValidationError as e:
        raise ModelFileError(f"invalid tolerance override: {e}")


def _format_values(values) -> str:
    if values is None:
        return "n/a"
    if len(values) == 0:
        return "none"
    formatted = []
    for value in values:
        value = complex(value)
        formatted.append(f"{value.real:.6g}" if value.imag == 0 else f"{value:.6g}")
    return ", ".join(formatted)


def _eigen_pairs(matrix: np.ndarray) -> list[list[float]]:
    if matrix.size == 0:
        return []
    return [[float(v.real), float(v.imag)] for v in np.sort_complex(np.linalg.eigvals(matrix))]


def _matrix_dict(r: ss.Realization) -> dict:
    return {"A": r.a.tolist(), "B": r.b.tolist(), "C": r.c.tolist(), "D": r.d.tolist()}


def cmd_analyze(args: argparse.Namespace) -> int:
    print(f"Loading model from {args.model}")
    model = io_utils.load_model(args.model)
    tol = _tolerances(args, model)
    w_minus, a = spectral.to_biproper(model.to_realization(), args.moebius, tol)
    if a:
        print(f"Working in the Moebius frame a = {a:.6g}")

    cp = spectral.conjugate_phase(w_minus, tol)
    gramian = spectral.check_gramian_identities(cp, tol)
    extremal = cp.extremal
    pole_zero = ss.poles_zeros(w_minus, tol)
    report = {
        "name": model.name,
        "moebius_parameter": a,
        "w_minus": _matrix_dict(w_minus),
        "w_plus": _matrix_dict(extremal.w_plus),
        "w_bar_plus": _matrix_dict(extremal.w_bar_plus),
        "t1": _matrix_dict(extremal.t1),
        "t2": _matrix_dict(extremal.t2),
        "t": _matrix_dict(cp.t),
        "X": extremal.x.tolist(),
        "Y": extremal.y.tolist(),
        "Z": extremal.z.tolist(),
        "p0": cp.p0.tolist(),
        "p0_inv": cp.p0_inv.tolist(),
        "gramian_residuals": gramian.residuals,
        "eigenvalues": {
            "A": _eigen_pairs(w_minus.a),
            "gamma": _eigen_pairs(cp.gamma),
            "a_inv_t": _eigen_pairs(cp.a_inv_t),
        },
        "poles_zeros": pole_zero.to_dict(),
    }
    if args.output:
        io_utils.save_json(report, args.output)
        print(f"Saved report to {args.output}")

    residual_lines = "\n".join(
        report_templates.RESIDUAL_LINE_TEMPLATE.format(name=name, residual=value)
        for name, value in gramian.residuals.items()
    )
    print(report_templates.ANALYZE_SUMMARY_TEMPLATE.format(
        name=model.name,
        n_states=w_minus.n_states,
        n_inputs=w_minus.n_inputs,
        degree=ss.mcmillan_degree(cp.t, tol),
        expected_degree=2 * w_minus.n_states,
        poles=_format_values(pole_zero.poles),
        zeros=_format_values(pole_zero.zeros),
        residual_lines=residual_lines,
        verdict=factors.Verdict.of(gramian.passed).value,
    ))
    return EXIT_OK if gramian.passed else EXIT_INVALID


def cmd_factors(args: argparse.Namespace) -> int:
    print(f"Loading model from {args.model}")
    model = io_utils.load_model(args.model)
    specs = io_utils.load_specs(args.specs)
    print(f"Loaded {len(specs)} subspace specs from {args.specs}")
    tol = _tolerances(args, model)
    family = factors.factor_family(
        model.to_realization(),
        specs,
        tol,
        moebius_parameter=args.moebius,
        show_progress=True,
    )

    os.makedirs(args.out_dir, exist_ok=True)
    rows = []
    for idx, (factor, report) in enumerate(family):
        file_name = f"factor_{idx:03d}.json"
        io_utils.save_model(
            io_utils.ModelFile.from_realization(factor, name=f"{model.name}_factor_{idx:03d}"),
            os.path.join(args.out_dir, file_name),
        )
        print(report_templates.FACTOR_LINE_TEMPLATE.format(
            index=idx,
            label=report.label,
            degree=report.degree,
            expected_degree=report.expected_degree,
            spectrum_residual=report.spectrum_residual,
            verdict=report.verdict.value,
        ))
        rows.append({
            "index": idx,
            "label": report.label,
            "file": file_name,
            "degree": report.degree,
            "expected_degree": report.expected_degree,
            "divisor_degree": report.divisor_degree,
            "complement_degree": report.complement_degree,
            "spectrum_residual": report.spectrum_residual,
            "poles": _format_values(report.poles_zeros.poles),
            "zeros": _format_values(report.poles_zeros.zeros),
            "verdict": report.verdict.value,
        })
    summary_path = os.path.join(args.out_dir, "summary.csv")
    pd.DataFrame(rows, columns=SUMMARY_COLUMNS).to_csv(summary_path, index=False, lineterminator="\n")
    print(f"Saved {len(family)} factors and summary to {args.out_dir}")
    return EXIT_OK if all(report.passed for _, report in family) else EXIT_VERIFY_FAILED


def cmd_verify(args: argparse.Namespace) -> int:
    model = io_utils.load_model(args.model)
    candidate = io_utils.load_model(args.candidate)
    tol = _tolerances(args, model)
    w_minus, a = spectral.to_biproper(model.to_realization(), args.moebius, tol)
    w0 = ss.moebius(candidate.to_realization(), a, tol) if a else candidate.to_realization()

    report = factors.verify_factor(w0, w_minus, tol, label=candidate.name)
    reasons = "".join(f"\n  - {reason}" for reason in report.reasons)
    print(report_templates.VERIFY_REPORT_TEMPLATE.format(
        candidate=candidate.name,
        model=model.name,
        degree=report.degree,
        expected_degree=report.expected_degree,
        spectrum_residual=report.spectrum_residual,
        poles=_format_values(report.poles_zeros.poles if report.poles_zeros else None),
        zeros=_format_values(report.poles_zeros.zeros if report.poles_zeros else None),
        verdict=report.verdict.value,
        reasons=reasons,
    ))
    if not report.passed:
        return EXIT_VERIFY_FAILED

    try:
        _, certified = factors.extract_left_divisor(w_minus, w0, tol)
    except (NotAFactor, NotMinimalFactor) as e:
        print(f"Divisor check failed: {e}")
        return EXIT_VERIFY_FAILED
    print(report_templates.DIVISOR_CERTIFICATE_TEMPLATE.format(
        divisor_degree=certified.divisor_degree,
        complement_degree=certified.complement_degree,
        allpass_residual=certified.allpass_residual,
        total=2 * w_minus.n_states,
    ))
    return EXIT_OK


def spectrum_table(w: ss.Realization, samples: int, tol: ToleranceConfig = DEFAULT_TOLERANCES) -> pd.DataFrame:
    """
    Phi(e^{i theta}) at theta_k = 2 pi k / samples: real diagonal entries and
    real/imaginary parts of the upper off-diagonal entries.
    """
    size = w.n_outputs
    columns = ["theta"]
    for i in range(size):
        for j in range(i, size):
            if i == j:
                columns.append(f"phi_{i + 1}_{j + 1}")
            else:
                columns += [f"phi_{i + 1}_{j + 1}_re", f"phi_{i + 1}_{j + 1}_im"]

    rows = []
    for theta in 2 * np.pi * np.arange(samples) / samples:
        phi = spectral.spectrum_sample(w, np.exp(1j * theta), tol)
        row = [float(theta)]
        for i in range(size):
            for j in range(i, size):
                if i == j:
                    row.append(float(phi[i, j].real))
                else:
                    row += [float(phi[i, j].real), float(phi[i, j].imag)]
        rows.append(row)
    return pd.DataFrame(rows, columns=columns)


def cmd_spectrum(args: argparse.Namespace) -> int:
    model = io_utils.load_model(args.model)
    tol = _tolerances(args, model)
    table = spectrum_table(model.to_realization(), args.num_samples, tol)
    if args.output:
        table.to_csv(args.output, index=False, lineterminator="\n")
        print(f"Saved {len(table)} spectrum samples to {args.output}")
    else:
        table.to_csv(sys.stdout, index=False, lineterminator="\n")
    return EXIT_OK


def _example_checks(tol: ToleranceConfig) -> list[tuple[str, float]]:
    golden = io_utils.load_json(io_utils.get_path(io_utils.EXAMPLE_ASSET_PATH_DICT["golden"]))
    w_minus = io_utils.load_example_model("w_minus").to_realization()
    w_bar_minus = io_utils.load_example_model("w_bar_minus").to_realization()

    cp = spectral.conjugate_phase(w_minus, tol)
    plus, bar = cp.extremal.plus, cp.extremal.bar_plus
    div = divisors.divisor_from_projector(cp, np.array(golden["projector_class_two"]), tol)
    expected_divisor = golden["divisor_class_two"]

    compared = [
        ("conjugate phase A", cp.t.a, golden["a_cal"]),
        ("conjugate phase B", cp.t.b, golden["b_cal"]),
        ("conjugate phase C", cp.t.c, golden["c_cal"]),
        ("conjugate phase D", cp.t.d, golden["d_cal"]),
        ("P0^-1", cp.p0_inv, golden["p0_inv"]),
        ("X", plus.x, golden["x"]),
        ("U1", plus.u1, golden["u1"]),
        ("G1", plus.g1, golden["g1"]),
        ("B_plus", plus.b_plus, golden["b_plus"]),
        ("D_plus", plus.d_plus, golden["d_plus"]),
        ("Y", bar.y, golden["y"]),
        ("H2", bar.h2, golden["h2"]),
        ("U2", bar.u2, golden["u2"]),
        ("G2", bar.g2, golden["g2"]),
        ("P for class two", div.p, golden["p_class_two"]),
        ("class two divisor A", div.t_ell.a, expected_divisor["A"]),
        ("class two divisor B", div.t_ell.b, expected_divisor["B"]),
        ("class two divisor C", div.t_ell.c, expected_divisor["C"]),
        ("class two divisor D", div.t_ell.d, expected_divisor["D"]),
        ("Phi(1)", spectral.spectrum_sample(w_minus, 1.0, tol), golden["spectrum_at_one"]),
    ]
    checks = [
        (name, float(np.max(np.abs(np.asarray(value) - np.asarray(expected)))))
        for name, value, expected in compared
    ]

    points = ss.circle_points(16)
    phi_22 = np.array([spectral.spectrum_sample(w_minus, z, tol)[1, 1] for z in points])
    closed_form = (
        np.polyval(golden["phi_22"]["numerator"], points)
        / np.polyval(golden["phi_22"]["denominator"], points)
    )
    checks.append(("Phi_22 closed form", float(np.max(np.abs(phi_22 - closed_form)))))

    for theta in (0.0, np.pi / 6, np.pi / 4, np.pi / 2):
        c, s = np.cos(theta), np.sin(theta)
        spec = divisors.SubspaceSpec(a=divisors.SubspacePart(basis=[[c], [s]]))
        line_div = divisors.divisor_from_projector(cp, divisors.projector_from_spec(cp, spec, tol), tol)
        expected_d = np.array([[1 + c * c, c * s], [c * s, 1 + s * s]])
        checks.append((f"D_theta at {theta:.4f}", float(np.max(np.abs(line_div.d_p - expected_d)))))

    report = factors.verify_factor(w_bar_minus, w_minus, tol)
    checks.append(("printed Wbar_- spectrum", report.spectrum_residual if report.passed else float("inf")))
    return checks


def cmd_example(args: argparse.Namespace) -> int:
    tol = _tolerances(args, None)
    passed = True
    for name, deviation in _example_checks(tol):
        ok = deviation <= EXAMPLE_TOLERANCE
        passed = passed and ok
        print(report_templates.EXAMPLE_CHECK_TEMPLATE.format(
            status="ok" if ok else "FAIL", name=name, residual=deviation,
        ))
    print(report_templates.P0_INV_SIGN_NOTE)
    print(report_templates.PHI_DISPLAY_NOTE)
    return EXIT_OK if passed else EXIT_VERIFY_FAILED


COMMAND_DICT = {
    "analyze": cmd_analyze,
    "factors": cmd_factors,
    "verify": cmd_verify,
    "spectrum": cmd_spectrum,
    "example": cmd_example,
}


def _moebius_value(value: str) -> float | str:
    return value if value == "auto" else float(value)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol", type=float, default=None, help="residual tolerance")
    common.add_argument("--samples", type=int, default=None, help="unit-circle samples for checks")
    common.add_argument(
        "--moebius", type=_moebius_value, nargs="?", const="auto", default=None,
        help="run in a Moebius frame; give a value or let it be chosen (put it after positionals)",
    )
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(
        description="Extremal spectral factors, conjugate phase and minimal spectral factors",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    analyze = subparsers.add_parser("analyze", parents=[common], help="extremal factors and conjugate phase")
    analyze.add_argument("model")
    analyze.add_argument("-o", "--output", default=None)

    factor_parser = subparsers.add_parser("factors", parents=[common], help="minimal factors for subspace specs")
    factor_parser.add_argument("model")
    factor_parser.add_argument("specs")
    factor_parser.add_argument("-d", "--out_dir", default="factors")

    verify = subparsers.add_parser("verify", parents=[common], help="check a candidate spectral factor")
    verify.add_argument("model")
    verify.add_argument("candidate")

    spectrum = subparsers.add_parser("spectrum", parents=[common], help="spectral density samples as CSV")
    spectrum.add_argument("model")
    spectrum.add_argument("-n", "--num_samples", type=int, default=64)
    spectrum.add_argument("-o", "--output", default=None)

    subparsers.add_parser("example", parents=[common], help="reproduce the built-in worked example")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return COMMAND_DICT[args.command](args)
    except ModelFileError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_PARSE
    except SpectralFactorError as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
