"""Exception and warning types shared across the package."""


class MasseyFlowError(Exception):
    """Base class for all library errors."""


class Inconsistent(MasseyFlowError):
    """A right-hand side is not in the numerical image of a map."""

    def __init__(self, residual, scale):
        self.residual = float(residual)
        self.scale = float(scale)
        super().__init__(f"right-hand side not in image (residual {residual:.3e}, scale {scale:.3e})")


class NotFlat(MasseyFlowError):
    """The composed series d_t o d_t has a nonvanishing coefficient."""

    def __init__(self, order, residual):
        self.order = int(order)
        self.residual = float(residual)
        super().__init__(f"NotFlat({order}): residual {residual:.3e}")


class NotInDomain(MasseyFlowError):
    """A vector admits no correctors at the requested order."""

    def __init__(self, order, residual=float("nan")):
        self.order = int(order)
        self.residual = float(residual)
        super().__init__(f"NotInDomain: obstruction at order {order} (residual {residual:.3e})")


class IsomorphismFailure(MasseyFlowError):
    """Harmonic and quotient pages have different dimensions."""


class MatchingAmbiguity(MasseyFlowError):
    """Eigenvector overlaps do not single out a branch assignment."""

    def __init__(self, t_left, t_right, overlap):
        self.interval = (float(t_left), float(t_right))
        self.overlap = float(overlap)
        super().__init__(
            f"ambiguous branch matching on [{t_left:.3e}, {t_right:.3e}] "
            f"(weakest overlap {overlap:.3f}); retry with a smaller radius"
        )


class InvalidStar(MasseyFlowError):
    def __init__(self, prop, defect):
        self.prop = prop
        self.defect = float(defect)
        super().__init__(f"InvalidStar({prop}): defect {defect:.3e}")


class StarJetMismatch(MasseyFlowError):
    pass


class PairingNotDescending(MasseyFlowError):
    def __init__(self, defect):
        self.defect = float(defect)
        super().__init__(f"pairing does not descend to the page (defect {defect:.3e})")


class NotHermitian(MasseyFlowError):
    def __init__(self, defect):
        self.defect = float(defect)
        super().__init__(f"matrix is not Hermitian (defect {defect:.3e})")


class Unresolved(MasseyFlowError):
    """Some eigenvalue branches vanish beyond the requested order."""

    def __init__(self, max_n, count):
        self.max_n = int(max_n)
        self.count = int(count)
        super().__init__(f"{count} even-degree classes survive past order {max_n}")


class AxiomViolation(MasseyFlowError):
    def __init__(self, axiom, indices, defect):
        self.axiom = axiom
        self.indices = tuple(int(i) for i in indices)
        self.defect = float(defect)
        super().__init__(f"AxiomViolation({axiom}) at basis {self.indices}: defect {defect:.3e}")


class RecursionViolation(MasseyFlowError):
    def __init__(self, order, defect):
        self.order = int(order)
        self.defect = float(defect)
        super().__init__(f"RecursionViolation({order}): defect {defect:.3e}")


class NotCocycle(MasseyFlowError):
    def __init__(self, index, defect):
        self.index = int(index)
        self.defect = float(defect)
        super().__init__(f"NotCocycle: input {index} has |dx| = {defect:.3e}")


class Obstructed(MasseyFlowError):
    """A Massey system cannot be extended; carries the obstruction class."""

    def __init__(self, multi_index, representative, class_norm):
        self.multi_index = tuple(multi_index)
        self.representative = representative
        self.class_norm = float(class_norm)
        super().__init__(
            f"Obstructed at I={self.multi_index}: obstruction class norm {class_norm:.3e}"
        )


class InvalidDirection(MasseyFlowError):
    pass


class GenerationFailed(MasseyFlowError):
    pass


class ParseError(MasseyFlowError):
    pass


class RankStabilityWarning(UserWarning):
    """A singular value sits within a factor 10 of the rank cutoff."""
