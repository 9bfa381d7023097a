"""Logger configuration for memorization laboratory test cases.

Loggers adapt to the execution environment: in headless environments (like GitHub Actions) they are silenced to keep test output clean, and locally they print to the console.
"""

import os

from lm_memorization.lm_memorization_logging.memorization_logger import Memorization_Error_Log, Memorization_Warning_Log, Training_Log


def _is_headless_environment() -> bool:
    """
    Detect if running in a headless environment (CI/CD).

    Returns:
        bool: True if in a headless environment, False otherwise.
    """
    ci_indicators = [
        "CI",  # Generic CI indicator
        "GITHUB_ACTIONS",  # GitHub Actions
        "TRAVIS",  # Travis CI
        "CIRCLECI",  # Circle CI
        "JENKINS_HOME",  # Jenkins
        "GITLAB_CI",  # GitLab CI
        "BUILDKITE",  # Buildkite
        "TF_BUILD",  # Azure Pipelines
    ]

    return any(os.environ.get(indicator) for indicator in ci_indicators)


_log_to_console = not _is_headless_environment()


def get_test_training_logger(name: str = "Test Training Log") -> Training_Log:
    """
    Args:
        name (str, optional): Name of logger to use. Defaults to "Test Training Log".

    Returns:
        Training_Log: Training log used for a given test case.
    """
    return Training_Log(log_to_console=_log_to_console, log_to_file=False, log_name=name)


def get_test_warning_logger(name: str = "Test Memorization Warning Log") -> Memorization_Warning_Log:
    """
    Args:
        name (str, optional): Name of logger to use. Defaults to "Test Memorization Warning Log".

    Returns:
        Memorization_Warning_Log: Warning log used for a given test case.
    """
    return Memorization_Warning_Log(log_to_console=_log_to_console, log_to_file=False, log_name=name)


def get_test_error_logger(name: str = "Test Memorization Error Log") -> Memorization_Error_Log:
    """
    Args:
        name (str, optional): Name of logger to use. Defaults to "Test Memorization Error Log".

    Returns:
        Memorization_Error_Log: Error log used for a given test case.
    """
    return Memorization_Error_Log(log_to_console=_log_to_console, log_to_file=False, log_name=name)
