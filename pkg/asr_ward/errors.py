class AsrWardError(ValueError):
    """Base class for all pipeline errors. `exit_code` is what the CLI returns."""

    exit_code = 4


### Input and format problems (exit 2)
class InputError(AsrWardError):
    exit_code = 2


class IoError(InputError):
    pass


class FormatError(InputError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SchemaError(InputError):
    pass


class DimMismatch(InputError):
    pass


class EmptyInput(InputError):
    pass


class EmptySequence(InputError):
    pass


class EmptyReference(InputError):
    pass


class RangeError(InputError):
    pass


class TooShort(InputError):
    pass


class EncoderResolutionError(InputError):
    pass


class MissingPrediction(InputError):
    def __init__(self, example_id: str):
        self.example_id = example_id
        super().__init__(f"No prediction for example {example_id}")


### Data contract violations (exit 3)
class DataContractError(AsrWardError):
    exit_code = 3


class EmptyClass(DataContractError):
    pass


class TooFewExamples(DataContractError):
    pass


class EmptyConfusion(DataContractError):
    pass


### Internal invariant violations (exit 4)
class InternalError(AsrWardError):
    exit_code = 4


class SegmentationMismatch(InternalError):
    pass
