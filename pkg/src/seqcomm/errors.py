"""Exception hierarchy.

Everything raised on bad input derives from ``ValidationError`` so the CLI can
map it to exit code 2 in one place.
"""


class SeqCommError(Exception):
    pass


class ValidationError(SeqCommError, ValueError):
    pass


class EmptyGraph(ValidationError):
    """The graph has no edges, so 2m = 0 and modularity is undefined."""


class DimensionMismatch(ValidationError):
    pass


class EmptySubset(ValidationError):
    pass


class SelfLoop(ValidationError):
    pass


class TooLarge(ValidationError):
    pass


class InvalidEps(ValidationError):
    pass


class DegeneratePartition(ValidationError):
    pass


class ParseError(ValidationError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class IdOutOfRange(ParseError):
    pass


class NotSquare(ValidationError):
    pass


class NotSymmetric(ValidationError):
    def __init__(self, max_asymmetry):
        super().__init__(f"matrix is not symmetric (max |M - M^T| = {max_asymmetry:.3g})")
        self.max_asymmetry = max_asymmetry


class BadEntry(ValidationError):
    pass


class NoConvergence(SeqCommError):
    def __init__(self, iterations, residual):
        super().__init__(
            f"power iteration did not converge after {iterations} iterations "
            f"(last residual {residual:.3e})"
        )
        self.iterations = iterations
        self.residual = residual


class Indivisible(SeqCommError):
    """No community admits a split with positive modularity gain."""


class NoFinitePiece(SeqCommError):
    pass


class NonConvergence(SeqCommError):
    """Alpha calibration hit ``max_rounds`` without settling.

    ``alphas`` holds the full per-round sequence, starting with the neutral
    initial value.
    """

    def __init__(self, alphas, report=None):
        seq = ", ".join(f"{a:.6g}" for a in alphas)
        super().__init__(f"alpha did not converge within {len(alphas) - 1} rounds: [{seq}]")
        self.alphas = list(alphas)
        self.report = report
