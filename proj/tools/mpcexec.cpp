#include <iostream>

int main() {
  std::cout << "mpcexec placeholder\n";
  return 0;
}
