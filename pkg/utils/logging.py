from typing import Mapping

RULE = '=' * 60


def print_header(title: str, details: Mapping = None):
    """Banner for a CLI command; details print as aligned key: value lines"""
    print(f"\n{RULE}")
    print(title)
    if details:
        width = max(len(str(k)) for k in details)
        for key, value in details.items():
            print(f"  {str(key).ljust(width)} : {value}")
    print(RULE)
