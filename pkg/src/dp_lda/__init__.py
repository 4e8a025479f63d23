import json
import logging
import logging.config
import os

LOG_CONFIG = "log-config.json"
LOGS_DIR = "logs"


def configure_logging(verb: str) -> logging.Logger:
    """
    Loads log-config.json from the working directory, with the file handler
    writing to logs/dp-lda-<verb>.log. Without the file, logs go to stderr.
    """
    if not os.path.exists(LOG_CONFIG):
        logging.basicConfig(level=logging.INFO, format="%(asctime)s [%(levelname)s] %(name)s: %(message)s")
        return logging.getLogger("dp-lda")

    with open(LOG_CONFIG, "r") as f:
        log_config = json.load(f)
    os.makedirs(LOGS_DIR, exist_ok=True)

    # One log file per verb
    log_config["handlers"]["file"]["filename"] = os.path.join(LOGS_DIR, f"dp-lda-{verb}.log")
    logging.config.dictConfig(log_config)
    return logging.getLogger("dp-lda")
