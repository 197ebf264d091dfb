from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    PROJECT_NAME: str = "barriertop"
    VERSION: str = "0.1.0"

    # Runtime
    THREADS: int = 1
    LOG_LEVEL: str = "INFO"
    RESULTS_DIR: str = "results"

    # Operator defaults
    DEFAULT_THETA: float = 0.3
    DEFAULT_DISCRETIZATION: str = "fd4"
    SOLVER_TOL: float = 1e-10
    MAX_INVERSE_ITERATIONS: int = 200
    RESOLVENT_CAP: float = 1e12

    # Lattice
    COLLISION_TOL: float = 1e-8

    # Hamiltonian flows
    INTEGRATOR_RTOL: float = 1e-12
    INTEGRATOR_ATOL: float = 1e-14

    # Cross-checks against dense eigensolves
    DENSE_ORACLE: bool = False

    model_config = SettingsConfigDict(
        env_file=".env",
        env_prefix="BARRIERTOP_",
        case_sensitive=True,
        extra="ignore",
    )


settings = Settings()
