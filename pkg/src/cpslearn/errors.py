class PipelineError(Exception):
    """Base class for all errors raised by this package.

    Concrete error types live in the module that raises them, so the
    defining module of an exception identifies the pipeline stage at fault.
    """
