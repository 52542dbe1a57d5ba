#!/usr/bin/env python
"""
Test Runner for the reweighting apps
This script runs the test suite of every app and prints a per-app report.
"""

import os
import sys
import django
from django.conf import settings
from django.test.utils import get_runner

TEST_SUITES = [
    'tilt.tests',
    'classifiers.tests',
    'extra.tests',
    'rtb.tests',
    'evaluation.tests',
    'pipeline.tests',
]


def setup_django():
    """Setup Django environment for testing"""
    os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'extra_backend.test_settings')
    django.setup()


def run_tests():
    """Run the test suite of every app"""
    setup_django()

    TestRunner = get_runner(settings)
    test_runner = TestRunner()

    print("Starting reweighting test suite")
    print("=" * 60)

    failed_suites = []
    total_errors = 0

    for test_suite in TEST_SUITES:
        print(f"\nRunning tests for: {test_suite}")
        print("-" * 40)

        try:
            failures = test_runner.run_tests([test_suite])

            if failures:
                print(f"{test_suite} had {failures} failures")
                failed_suites.append(test_suite)
            else:
                print(f"{test_suite} passed successfully")

        except Exception as e:
            print(f"Error running {test_suite}: {e}")
            total_errors += 1

    print("\n" + "=" * 60)
    print("TEST SUMMARY")
    print("=" * 60)

    if not failed_suites and total_errors == 0:
        print("All suites passed.")
    else:
        print(f"Failing suites: {', '.join(failed_suites) or 'none'}; suites that errored: {total_errors}")
        print("Slow end-to-end checks run under pytest: pytest -m slow")

    return not failed_suites and total_errors == 0


def run_specific_tests(test_pattern=None):
    """Run specific test cases"""
    setup_django()

    TestRunner = get_runner(settings)
    test_runner = TestRunner()

    if test_pattern:
        print(f"Running tests matching pattern: {test_pattern}")
        failures = test_runner.run_tests([test_pattern])
    else:
        print("Running all tests")
        failures = test_runner.run_tests(TEST_SUITES)

    return failures == 0


if __name__ == '__main__':
    if len(sys.argv) > 1:
        # Run specific tests
        pattern = sys.argv[1]
        success = run_specific_tests(pattern)
    else:
        success = run_tests()

    sys.exit(0 if success else 1)
