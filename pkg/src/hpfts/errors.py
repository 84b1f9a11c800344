"""Exception hierarchy.

``ValidationError`` subclasses signal bad input (CLI exit code 2);
``Unsatisfiable`` has its own exit code.
"""


class HpftsError(Exception):
    pass


class ValidationError(HpftsError, ValueError):
    pass


class MalformedRow(ValidationError):
    pass


class GapInYears(ValidationError):
    def __init__(self, year, msg=None):
        self.year = year
        super().__init__(msg or f"missing year {year}")


class NegativeCount(ValidationError):
    pass


class MissingAge(ValidationError):
    pass


class ShapeMismatch(ValidationError):
    pass


class ZeroDenominator(ValidationError):
    def __init__(self, year=None, age=None, msg=None):
        self.year = year
        self.age = age
        if msg is None:
            msg = f"zero denominator at year={year}, age={age}"
        super().__init__(msg)


class KTooLarge(ValidationError):
    pass


class DegenerateSeries(ValidationError):
    pass


class SeriesTooShort(ValidationError):
    pass


class HorizonTooLong(ValidationError):
    pass


class YearOutOfRange(ValidationError):
    pass


class InvalidRate(ValidationError):
    pass


class RatesMissing(ValidationError):
    pass


class ConfigError(ValidationError):
    pass


class Unsatisfiable(HpftsError):
    """OADR target cannot be met even at the maximum pension age."""
