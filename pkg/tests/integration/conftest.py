from tests.unit.conftest import default_config

__all__ = ["default_config"]
