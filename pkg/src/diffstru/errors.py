"""Exception hierarchy; each class carries the CLI exit code it maps to."""


class DiffStruError(Exception):
    exit_code = 1


class ConfigError(DiffStruError, ValueError):
    exit_code = 2


class DataError(DiffStruError, ValueError):
    exit_code = 3


class ShapeMismatchError(DataError):
    def __init__(self, what, left_name, left_shape, right_name, right_shape):
        self.left_shape = tuple(left_shape)
        self.right_shape = tuple(right_shape)
        super().__init__(
            f"{what}: {left_name} has shape {self.left_shape} but {right_name} has shape {self.right_shape}"
        )


class NumericError(DiffStruError, ArithmeticError):
    exit_code = 4
