#pragma once

#include <condition_variable>
#include <cstddef>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

namespace coherency::tools {

// Single-producer/single-consumer line queue. The reader thread pushes, the
// engine thread pops; close() marks end of input.
class LineQueue {
 public:
  explicit LineQueue(std::size_t capacity = 4096) : capacity_(capacity) {}

  // Blocks while full. Returns false once the consumer has abandoned the queue.
  bool push(std::string line);
  void close();
  // Consumer gives up; later pushes return false.
  void abandon();

  // Blocks until a line arrives or the queue is closed and drained.
  std::optional<std::string> pop();

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::string> lines_;
  std::size_t capacity_;
  bool closed_ = false;
  bool abandoned_ = false;
};

// Starts a detached thread that reads newline-terminated records from fd
// into the queue and closes it at EOF. The fd is closed afterwards when
// close_fd is set.
void start_reader(int fd, std::shared_ptr<LineQueue> queue, bool close_fd);

// Binds, listens and accepts a single TCP connection. Throws
// std::runtime_error on failure.
int accept_one(const std::string& address, int port);

}  // namespace coherency::tools
