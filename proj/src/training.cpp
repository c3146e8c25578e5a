#include "lap/nn.hpp"
