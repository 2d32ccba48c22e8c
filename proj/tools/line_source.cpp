#include "line_source.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <stdexcept>
#include <thread>

namespace coherency::tools {

bool LineQueue::push(std::string line) {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return lines_.size() < capacity_ || abandoned_; });
  if (abandoned_) return false;
  lines_.push_back(std::move(line));
  cv_.notify_all();
  return true;
}

void LineQueue::close() {
  std::lock_guard lock(mu_);
  closed_ = true;
  cv_.notify_all();
}

void LineQueue::abandon() {
  std::lock_guard lock(mu_);
  abandoned_ = true;
  lines_.clear();
  cv_.notify_all();
}

std::optional<std::string> LineQueue::pop() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return !lines_.empty() || closed_; });
  if (lines_.empty()) return std::nullopt;
  auto line = std::move(lines_.front());
  lines_.pop_front();
  cv_.notify_all();
  return line;
}

void start_reader(int fd, std::shared_ptr<LineQueue> queue, bool close_fd) {
  std::thread([fd, queue = std::move(queue), close_fd] {
    std::string pending;
    char buf[65536];
    bool open = true;
    while (open) {
      const ssize_t n = ::read(fd, buf, sizeof buf);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) break;
      pending.append(buf, static_cast<std::size_t>(n));
      std::size_t start = 0;
      for (auto pos = pending.find('\n', start); pos != std::string::npos;
           pos = pending.find('\n', start)) {
        if (!queue->push(pending.substr(start, pos - start))) {
          open = false;
          break;
        }
        start = pos + 1;
      }
      pending.erase(0, start);
    }
    if (open && !pending.empty()) queue->push(std::move(pending));
    queue->close();
    if (close_fd) ::close(fd);
  }).detach();
}

int accept_one(const std::string& address, int port) {
  if (port <= 0 || port > 65535) throw std::runtime_error("port out of range: " + std::to_string(port));
  const int srv = ::socket(AF_INET, SOCK_STREAM, 0);
  if (srv < 0) throw std::runtime_error(std::string("socket: ") + std::strerror(errno));
  const int one = 1;
  ::setsockopt(srv, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<uint16_t>(port));
  if (::inet_pton(AF_INET, address.c_str(), &addr.sin_addr) != 1) {
    ::close(srv);
    throw std::runtime_error("invalid bind address: " + address);
  }
  if (::bind(srv, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
    const std::string err = std::strerror(errno);
    ::close(srv);
    throw std::runtime_error("cannot bind " + address + ":" + std::to_string(port) + ": " + err);
  }
  if (::listen(srv, 1) != 0) {
    const std::string err = std::strerror(errno);
    ::close(srv);
    throw std::runtime_error("listen: " + err);
  }
  int conn = -1;
  do {
    conn = ::accept(srv, nullptr, nullptr);
  } while (conn < 0 && errno == EINTR);
  const int accept_errno = errno;
  ::close(srv);
  if (conn < 0) throw std::runtime_error(std::string("accept: ") + std::strerror(accept_errno));
  return conn;
}

}  // namespace coherency::tools
