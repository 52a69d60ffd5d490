"""Exception and warning types shared across the package."""


class NumericalDomainError(ArithmeticError):
    """A field produced a non-finite value, or could not be evaluated, at some point."""


class DegreeError(ValueError):
    pass


class KindError(TypeError):
    """Forms and multivectors were mixed in an operation that needs one variance."""


class CapacityError(ValueError):
    pass


class DegenerateSymplecticError(ArithmeticError):
    pass


class MissingSymmetryError(ValueError):
    pass


class IntegrationError(RuntimeError):
    def __init__(self, message, step=None):
        super().__init__(message if step is None else f"{message} (step {step})")
        self.step = step


class ValidationError(ValueError):
    def __init__(self, failures):
        self.failures = list(failures)
        lines = [f"{f['gate']}: {f['detail']}" for f in self.failures]
        super().__init__("system validation failed:\n  " + "\n  ".join(lines))


class SpectrumPairingWarning(RuntimeWarning):
    pass


class DomainExitWarning(RuntimeWarning):
    pass


class ComplexSpectrumWarning(RuntimeWarning):
    pass
