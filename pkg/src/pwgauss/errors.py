"""Exception hierarchy shared by the library and the CLI exit-code mapping."""


class PWGaussError(Exception):
    """Base class for every error raised by pwgauss."""


class HypothesisViolation(PWGaussError, ValueError):
    """A mathematical hypothesis required by a construction does not hold."""


class FactorizationFailure(PWGaussError, ArithmeticError):
    """The Gram matrix could not be factored reliably in double precision.

    The matrix is positive definite in exact arithmetic whenever the nodes are
    separated; this error reports a floating-point diagnosis (a nonpositive
    pivot, or a condition estimate above the cap), typically because ``lambda``
    is too small for the node density.
    """

    def __init__(self, message, *, lam=None, separation=None, n_nodes=None,
                 condition_estimate=None):
        self.lam = lam
        self.separation = separation
        self.n_nodes = n_nodes
        self.condition_estimate = condition_estimate
        ctx = []
        if lam is not None:
            ctx.append(f"lambda={lam:g}")
        if separation is not None:
            ctx.append(f"q={separation:g}")
        if n_nodes is not None:
            ctx.append(f"N={n_nodes}")
        if condition_estimate is not None:
            ctx.append(f"cond~{condition_estimate:.3e}")
        if ctx:
            message = f"{message} ({', '.join(ctx)})"
        super().__init__(message)

    def with_context(self, *, lam=None, separation=None, n_nodes=None):
        """Return a copy of this failure with extra solve context attached."""
        base = str(self.args[0]).split(" (")[0]
        return FactorizationFailure(
            base,
            lam=lam if lam is not None else self.lam,
            separation=separation if separation is not None else self.separation,
            n_nodes=n_nodes if n_nodes is not None else self.n_nodes,
            condition_estimate=self.condition_estimate,
        )


class SizeCapExceeded(PWGaussError, ValueError):
    """A configured size guard (node count, dense matrix order) was exceeded."""
