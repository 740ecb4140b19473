from app.cli.commands import degrade, evaluate, gen_data, restore, train

COMMANDS = (gen_data, degrade, train, evaluate, restore)

__all__ = ["COMMANDS"]
