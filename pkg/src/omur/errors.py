class ParameterError(ValueError):
    """A numerical argument lies outside its domain."""


class ConfigError(ValueError):
    """An experiment configuration is invalid; ``problems`` lists every field issue."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
