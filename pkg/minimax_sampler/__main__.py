# SPDX-License-Identifier: Apache-2.0
# Copyright Contributors to the minimax-sampler project

import sys
import traceback

try:
    from minimax_sampler.cli import main
except ImportError:
    traceback.print_exc()
    print(
        "Failed to import minimax_sampler! Are numpy and click installed?",
        file=sys.stderr,
    )
    sys.exit(2)

if __name__ == "__main__":
    main(prog_name="minimax-sampler")
