#include "qkvcomm/transport.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "qkvcomm/errors.hpp"

namespace qkvcomm {

void InMemoryTransport::send_frame(std::span<const uint8_t> payload) {
    std::lock_guard lock(mutex_);
    frames_.emplace_back(payload.begin(), payload.end());
}

std::optional<std::vector<uint8_t>> InMemoryTransport::recv_frame() {
    std::lock_guard lock(mutex_);
    if (frames_.empty()) return std::nullopt;
    std::vector<uint8_t> frame = std::move(frames_.front());
    frames_.pop_front();
    return frame;
}

size_t InMemoryTransport::pending() const {
    std::lock_guard lock(mutex_);
    return frames_.size();
}

namespace {

void write_all(int fd, const uint8_t* data, size_t len) {
    size_t sent = 0;
    while (sent < len) {
        const ssize_t n = ::send(fd, data + sent, len - sent, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw TransportError(std::string("send failed: ") + std::strerror(errno));
        }
        sent += size_t(n);
    }
}

// Returns bytes read; short only at end of stream.
size_t read_upto(int fd, uint8_t* data, size_t len) {
    size_t got = 0;
    while (got < len) {
        const ssize_t n = ::recv(fd, data + got, len - got, 0);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw TransportError(std::string("recv failed: ") + std::strerror(errno));
        }
        if (n == 0) break;
        got += size_t(n);
    }
    return got;
}

}  // namespace

TcpConnection::TcpConnection(int fd) : fd_(fd) {}

TcpConnection::~TcpConnection() { close(); }

void TcpConnection::close() {
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
}

void TcpConnection::send_frame(std::span<const uint8_t> payload) {
    if (fd_ < 0) throw TransportError("connection closed");
    if (payload.size() > 0xffffffffull) throw TransportError("frame exceeds u32 length");

    // frame = u32 LE length + payload, written as one buffer so a
    // connect failure never leaves a partial prefix behind
    std::vector<uint8_t> frame(4 + payload.size());
    const uint32_t len = uint32_t(payload.size());
    for (int i = 0; i < 4; ++i) frame[i] = uint8_t((len >> (8 * i)) & 0xff);
    std::memcpy(frame.data() + 4, payload.data(), payload.size());
    write_all(fd_, frame.data(), frame.size());
}

std::optional<std::vector<uint8_t>> TcpConnection::recv_frame() {
    if (fd_ < 0) throw TransportError("connection closed");

    uint8_t prefix[4];
    const size_t got = read_upto(fd_, prefix, 4);
    if (got == 0) return std::nullopt;  // clean close between frames
    if (got < 4) throw TransportError("frame incomplete: connection closed inside length prefix");

    uint32_t len = 0;
    for (int i = 0; i < 4; ++i) len |= uint32_t(prefix[i]) << (8 * i);
    if (len > (1u << 30)) throw TransportError("frame length exceeds 1 GiB cap");
    std::vector<uint8_t> payload(len);
    if (read_upto(fd_, payload.data(), len) < len)
        throw TransportError("frame incomplete: connection closed inside payload");
    return payload;
}

std::pair<std::string, uint16_t> parse_address(const std::string& address) {
    const size_t colon = address.rfind(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 >= address.size())
        throw TransportError("address must be host:port");
    const std::string host = address.substr(0, colon);
    const std::string port_str = address.substr(colon + 1);
    unsigned long port = 0;
    for (char c : port_str) {
        if (c < '0' || c > '9') throw TransportError("port must be numeric");
        port = port * 10 + unsigned(c - '0');
        if (port > 65535) throw TransportError("port out of range");
    }
    return {host, uint16_t(port)};
}

std::unique_ptr<TcpConnection> tcp_connect(const std::string& address) {
    const auto [host, port] = parse_address(address);

    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* result = nullptr;
    const std::string port_str = std::to_string(port);
    if (::getaddrinfo(host.c_str(), port_str.c_str(), &hints, &result) != 0)
        throw TransportError("cannot resolve " + address);

    int fd = -1;
    for (addrinfo* ai = result; ai != nullptr; ai = ai->ai_next) {
        fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
        if (fd < 0) continue;
        if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
        ::close(fd);
        fd = -1;
    }
    ::freeaddrinfo(result);
    if (fd < 0) throw TransportError("cannot connect to " + address);
    return std::make_unique<TcpConnection>(fd);
}

TcpListener::TcpListener(const std::string& address) : fd_(-1) {
    const auto [host, port] = parse_address(address);

    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd_ < 0) throw TransportError(std::string("socket failed: ") + std::strerror(errno));

    const int one = 1;
    ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));

    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (host == "0.0.0.0" || host.empty()) {
        addr.sin_addr.s_addr = INADDR_ANY;
    } else if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
        ::close(fd_);
        throw TransportError("listener host must be an IPv4 address");
    }
    if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
        const std::string err = std::strerror(errno);
        ::close(fd_);
        throw TransportError("bind failed: " + err);
    }
    if (::listen(fd_, 16) != 0) {
        const std::string err = std::strerror(errno);
        ::close(fd_);
        throw TransportError("listen failed: " + err);
    }

    sockaddr_in bound{};
    socklen_t bound_len = sizeof(bound);
    if (::getsockname(fd_, reinterpret_cast<sockaddr*>(&bound), &bound_len) == 0)
        port_ = ntohs(bound.sin_port);
}

TcpListener::~TcpListener() { close(); }

void TcpListener::close() {
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
}

std::unique_ptr<TcpConnection> TcpListener::accept() {
    if (fd_ < 0) throw TransportError("listener closed");
    const int fd = ::accept(fd_, nullptr, nullptr);
    if (fd < 0) throw TransportError(std::string("accept failed: ") + std::strerror(errno));
    return std::make_unique<TcpConnection>(fd);
}

}  // namespace qkvcomm
