// Copyright (c) 2026 the cwatt authors
// Licensed under the Apache License, Version 2.0.

int main() { return 0; }
