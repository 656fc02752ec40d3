from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    """Process-level configuration using Pydantic v2 BaseSettings."""
    
    # Application
    APP_NAME: str = "levy-particles"
    
    # Artifacts
    OUT_DIR: str = "results"
    
    # Execution
    THREADS: int = 1
    
    # Logging
    LOG_LEVEL: str = "INFO"
    LOG_JSON: bool = False
    
    # Numerics
    ASSIGNMENT_CAP: int = 2048  # largest exact assignment, points per cloud
    MOLLIFIER_NODES: int = 129  # midpoint nodes per axis
    MOM_GROUPS: int = 8  # median-of-means groups
    
    model_config = {
        "env_file": ".env",
        "env_prefix": "LEVY_",
        "case_sensitive": True,
        "extra": "ignore",
    }


# Global settings instance
settings = Settings()
