#include "rnl/cli.hpp"

#include <glog/logging.h>

#include <iostream>

int main(int argc, char** argv) {
  FLAGS_minloglevel = google::GLOG_ERROR;
  return rnl::cli::run(argc, argv, std::cout, std::cerr);
}
