from typing import Any, Tuple

import cmd_count
import cmd_diophantine
import cmd_example_kp
import cmd_spectrum

COMMANDS = ("bands", "gaps", "evans-scan", "roots", "count", "oracle-verify", "diophantine", "example-kp")


def route_and_process(cfg: Any) -> Tuple[bool, str]:
    command = cfg.command
    if command == "bands":
        return cmd_spectrum.process_bands(cfg)
    if command == "gaps":
        return cmd_spectrum.process_gaps(cfg)
    if command == "evans-scan":
        return cmd_spectrum.process_evans_scan(cfg)
    if command == "roots":
        return cmd_spectrum.process_roots(cfg)
    if command == "count":
        return cmd_count.process(cfg)
    if command == "oracle-verify":
        return cmd_count.process_oracle_verify(cfg)
    if command == "diophantine":
        return cmd_diophantine.process(cfg)
    if command == "example-kp":
        return cmd_example_kp.process(cfg)
    return False, f"Unknown command: {command}"
