class LevyParticlesError(Exception):
    """Base exception; `exit_code` is the status the CLI terminates with."""
    
    exit_code: int = 1
    
    def __init__(self, detail: str = "Simulation error"):
        super().__init__(detail)
        self.detail = detail


class ValidationError(LevyParticlesError):
    """Exception raised when an operation's precondition is violated."""
    
    exit_code = 2
    
    def __init__(self, detail: str = "Validation error"):
        super().__init__(detail=detail)


class ConfigError(ValidationError):
    """Exception raised for invalid experiment configuration."""
    
    def __init__(self, detail: str = "Invalid configuration"):
        super().__init__(detail=detail)


class DimensionError(ValidationError):
    """Exception raised for mismatched dimensions or support sizes."""
    
    def __init__(self, detail: str = "Dimension mismatch"):
        super().__init__(detail=detail)


class AssignmentTooLargeError(ValidationError):
    """Exception raised when an exact assignment exceeds the configured cap."""
    
    def __init__(self, detail: str = "assignment too large"):
        super().__init__(detail=detail)


class IntegratorError(LevyParticlesError):
    """Exception raised when a runtime invariant of the EM scheme breaks."""
    
    def __init__(self, detail: str = "Integrator invariant violated"):
        super().__init__(detail=detail)
