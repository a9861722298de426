import filecmp
import sys
import argparse

def compare_files(resultfile, expectedfile, message):
    result=filecmp.cmp(resultfile, expectedfile, shallow=False)
    if result:
        print(f"PASS: {message}", file=sys.stderr)
        return True
    else:
        print(f"FAIL: {message} [Try: diff {resultfile} {expectedfile}]", file=sys.stderr)
        return False

def config_args():
    parser = argparse.ArgumentParser(description='Check that two vme output files (snapshots.csv, steps.log) are byte-identical.')
    parser.add_argument('resultfile', help='The file produced by the run under test')
    parser.add_argument('expectfile', help='The file it must match')
    parser.add_argument('message',    help='Description of the check, printed with PASS or FAIL')

    _args=parser.parse_args()
    return _args

if __name__ == "__main__":
    # get command line params.
    args = config_args()

    try:
        sys.exit(0 if compare_files(args.resultfile,args.expectfile,args.message) else 1)
    except Exception as e:
        print(f"ERROR. Terminating compare-files with error:  {e}",file=sys.stderr)
        sys.exit(2)
