import os

from pydantic_settings import BaseSettings, SettingsConfigDict


class BaseConfig(BaseSettings):
    app_name: str = "dualsmooth"
    debug: bool = False
    oracle_grid_step: float = 1e-3
    oracle_grid_margin: float = 5.0
    plot_points: int = 401
    csv_float_format: str = ".12g"
    restore_margin: float = 1e-9
    restore_residual: float = 1e-6
    model_config = SettingsConfigDict(
        case_sensitive=False,
        env_prefix="DUALSMOOTH_",
        extra="ignore",
    )


class DevConfig(BaseConfig):
    debug: bool = True
    model_config = SettingsConfigDict(
        case_sensitive=False,
        env_prefix="DUALSMOOTH_",
        env_file="dev.env",
        extra="ignore",
    )


class ProdConfig(BaseConfig):
    debug: bool = False

    model_config = SettingsConfigDict(
        case_sensitive=False,
        env_prefix="DUALSMOOTH_",
        env_file=".env",
        extra="ignore",
    )


def get_config():
    env = os.getenv("DUALSMOOTH_ENV", "dev").lower()
    if env == "prod":
        return ProdConfig()
    return DevConfig()


config = get_config()
