from functools import lru_cache

from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    # Output
    output_root: str = "./runs"

    # Compute
    device: str = "cpu"
    torch_threads: int = 0  # 0 keeps the torch default

    # Logfire
    logfire_token: str = ""

    # Logging
    log_level: str = "INFO"
    log_interval: int = 50

    # Frozen feature extractor for perceptual/style losses
    feature_extractor: str = "random"  # "random" or "vgg19"
    vgg19_weights_path: str = ""
    feature_extractor_seed: int = 1234

    model_config = {"env_file": ".env", "env_file_encoding": "utf-8", "extra": "ignore"}


@lru_cache
def get_settings() -> Settings:
    return Settings()
