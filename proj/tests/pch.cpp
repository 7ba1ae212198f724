// Compiles the shared precompiled header that the test executables reuse.
