#include <iostream>
int main() { std::cout << "superweyl cli: placeholder\n"; return 0; }
