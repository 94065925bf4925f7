#include <cstdio>
int main() { std::puts("qpsim"); return 0; }
