#include "lap/nn.hpp"
int main(){return 0;}
