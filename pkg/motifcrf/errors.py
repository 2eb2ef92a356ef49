"""
Exceptions raised by ``motifcrf``.

Every error carries an ``exit_code`` used by the command line interface:
``2`` for usage problems (bad config, missing input), ``1`` for everything else.
Data errors also subclass ``ValueError``.
"""

__all__ = ["MotifCrfError", "ConfigError", "MissingArtifact", "MalformedRow",
           "DanglingReference", "DuplicateNoteId", "DuplicateInstanceId", "InvalidCorpus",
           "EmptyMovement", "EmptySequence", "HarmonyGap", "DimensionMismatch",
           "NonFiniteValue", "SingularHessian", "FitFailure", "EmptyData"]


class MotifCrfError(Exception):
    """Base class of all ``motifcrf`` errors."""
    exit_code = 1


class ConfigError(MotifCrfError, ValueError):
    exit_code = 2


class MissingArtifact(MotifCrfError, FileNotFoundError):
    """
    A stage input does not exist yet.

    Parameters:
        path (str): the artifact that was looked for.
        stage (str): the stage that needs it, if known.
    """
    exit_code = 2

    def __init__(self, path, stage=None):
        self.path = str(path)
        self.stage = stage
        msg = 'Missing artifact "{}"'.format(self.path)
        if stage is not None:
            msg += ' (run stage "{}" first)'.format(stage)
        super().__init__(msg)


class MalformedRow(MotifCrfError, ValueError):
    """
    A CSV row could not be parsed against its schema.

    Parameters:
        path (str): file name.
        line (int): 1-based physical line number in the file.
        reason (str): what went wrong.
    """
    def __init__(self, path, line, reason):
        self.path = str(path)
        self.line = line
        self.reason = reason
        super().__init__('{}:{}: {}'.format(self.path, line, reason))


class DanglingReference(MotifCrfError, ValueError):
    pass


class DuplicateNoteId(MotifCrfError, ValueError):
    pass


class DuplicateInstanceId(MotifCrfError, ValueError):
    pass


class InvalidCorpus(MotifCrfError, ValueError):
    """
    Raised by pipeline stages that refuse a corpus with validation diagnostics.

    Parameters:
        diagnostics (list): the ``Diagnostic`` records found.
    """
    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        head = '; '.join(str(d) for d in self.diagnostics[:5])
        more = len(self.diagnostics) - 5
        if more > 0:
            head += '; ... {} more'.format(more)
        super().__init__('Corpus failed validation: ' + head)


class EmptyMovement(MotifCrfError, ValueError):
    pass


class EmptySequence(MotifCrfError, ValueError):
    pass


class HarmonyGap(MotifCrfError, ValueError):
    """No harmony event is sounding at a queried onset."""
    pass


class DimensionMismatch(MotifCrfError, ValueError):
    pass


class NonFiniteValue(MotifCrfError, FloatingPointError):
    pass


class SingularHessian(MotifCrfError, ValueError):
    """
    The observed Hessian cannot be inverted.

    Parameters:
        min_eigenvalue (float): smallest eigenvalue of the negated Hessian.
    """
    def __init__(self, min_eigenvalue):
        self.min_eigenvalue = float(min_eigenvalue)
        super().__init__('Hessian is singular (smallest eigenvalue {:.3e})'.format(
            self.min_eigenvalue))


class FitFailure(MotifCrfError, RuntimeError):
    pass


class EmptyData(MotifCrfError, ValueError):
    pass
