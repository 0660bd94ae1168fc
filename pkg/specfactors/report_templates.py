ANALYZE_SUMMARY_TEMPLATE = """Model '{name}': n = {n_states}, m = {n_inputs}
Conjugate phase T: McMillan degree {degree} (expected {expected_degree})
Poles of W_-:  {poles}
Zeros of W_-:  {zeros}
Gramian identities:
{residual_lines}
Verdict: {verdict}"""


RESIDUAL_LINE_TEMPLATE = "  {name:<16} {residual:.3e}"


FACTOR_LINE_TEMPLATE = (
    "[{index:03d}] {label}: degree {degree}/{expected_degree}, "
    "spectrum residual {spectrum_residual:.3e}, {verdict}"
)


VERIFY_REPORT_TEMPLATE = """Candidate '{candidate}' against '{model}'
McMillan degree: {degree} (expected {expected_degree})
Spectrum residual: {spectrum_residual:.3e}
Poles: {poles}
Zeros: {zeros}
Verdict: {verdict}{reasons}"""


DIVISOR_CERTIFICATE_TEMPLATE = (
    "Left divisor W_-^(-1) W_0: degree {divisor_degree}, all-pass residual {allpass_residual:.3e}; "
    "complement degree {complement_degree}; {divisor_degree} + {complement_degree} = {total}"
)


EXAMPLE_CHECK_TEMPLATE = "{status:<4} {name:<28} max deviation {residual:.3e}"


P0_INV_SIGN_NOTE = """Note: the top-left block of P0^-1 is X = diag(-1/15, -1/32). It is negative
definite as the Stein equation requires; a printed version of this example shows
the opposite signs, which do not satisfy the Gramian identities."""


PHI_DISPLAY_NOTE = """Note: Phi_11 is recomputed from the model as
((1/2) z^2 - (17/8) z + 1/2) / (z^2 - (5/2) z + 1); only Phi_22 is compared with
its printed closed form."""
