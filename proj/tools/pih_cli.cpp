#include <cstdio>
int main() { std::puts("pih"); return 0; }
