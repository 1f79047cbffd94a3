#include <benchmark/benchmark.h>

// The packaged benchmark_main archive is LTO bytecode from another compiler
// release and fails to link, so main comes from here.
BENCHMARK_MAIN();
