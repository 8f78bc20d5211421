#include "app.hpp"

int main(int argc, char** argv) { return qhe::cli::run(argc, argv); }
