#ifndef AFBC_TESTS_TEMP_DIR_HPP
#define AFBC_TESTS_TEMP_DIR_HPP

#include <atomic>
#include <filesystem>
#include <string>

#include <unistd.h>

namespace afbc::test {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("afbc_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace afbc::test

#endif  // AFBC_TESTS_TEMP_DIR_HPP
