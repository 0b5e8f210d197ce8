import sys
import time

from colorama import init

import pybsvie as pb


def list_main():
    print(pb.list_scenarios(sys.argv[1] if len(sys.argv) > 1 else None))
    exit(0)


def main():
    init(autoreset=True)
    args = pb.args.gen_args()

    if args.list:
        print(pb.list_scenarios(args.scenario_dir))
        exit(0)

    print(
        r"""***************************************************
*                 __               _              *
*      ____  __  / /_  ______   __(_)__           *
*     / __ \/ / / / __ \/ ___/ | / / / _ \        *
*    / /_/ / /_/ / /_/ (__  )| |/ / /  __/        *
*   / .___/\__, /_.___/____/ |___/_/\___/         *
*  /_/    /____/                                  *
***************************************************"""
    )
    print("Welcome to pybsvie!\n")

    if args.verbose > 0:
        params = vars(args)
        print("pybsvie will be run with the following arguments:")
        for param, value in sorted(params.items()):
            print(f"  {param}: {value}")
        print(flush=True)

    start = time.time()
    status = pb.run_scenario(
        args.config,
        args.output_dir,
        args.seed,
        args.threads,
        args.checks,
        args.verbose,
        args.scenario_dir,
    )
    total_time = time.time() - start

    m, s = divmod(total_time, 60)
    h, m = divmod(int(m), 60)
    print(f"Total time: {h}h {m}m {s:0.2f}s")
    print(f'Artifacts have been saved to: "{args.output_dir}"', flush=True)

    exit(status)


if __name__ == "__main__":
    main()
