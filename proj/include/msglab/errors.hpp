#pragma once

#include <stdexcept>
#include <string>

namespace msglab {

class Error : public std::runtime_error {
 public:
  Error(std::string name, const std::string& what)
      : std::runtime_error(name + ": " + what), name_(std::move(name)) {}
  const std::string& name() const { return name_; }

 private:
  std::string name_;
};

#define MSGLAB_DEFINE_ERROR(Name)                         \
  class Name : public Error {                             \
   public:                                                \
    explicit Name(const std::string& what = #Name)        \
        : Error(#Name, what) {}                           \
  }

// crypto_suite
MSGLAB_DEFINE_ERROR(MalformedKey);
MSGLAB_DEFINE_ERROR(AuthenticationFailure);
MSGLAB_DEFINE_ERROR(ProtocolViolation);
// x3dh
MSGLAB_DEFINE_ERROR(NoSuchUser);
MSGLAB_DEFINE_ERROR(SignatureInvalid);
MSGLAB_DEFINE_ERROR(AbortAndErase);
MSGLAB_DEFINE_ERROR(NoSuchPrekey);
// ratchet
MSGLAB_DEFINE_ERROR(TooManySkipped);
MSGLAB_DEFINE_ERROR(NoMatchingKey);
// otr
MSGLAB_DEFINE_ERROR(AkeFailed);
MSGLAB_DEFINE_ERROR(NotEstablished);
MSGLAB_DEFINE_ERROR(ForgedUnderPublishedKey);
MSGLAB_DEFINE_ERROR(SmpAborted);
MSGLAB_DEFINE_ERROR(RefusesToForgeUnpublished);
MSGLAB_DEFINE_ERROR(PeerOffline);
// simnet
MSGLAB_DEFINE_ERROR(Conflict);
// session
MSGLAB_DEFINE_ERROR(SessionDead);
MSGLAB_DEFINE_ERROR(Unsupported);
MSGLAB_DEFINE_ERROR(VerificationFailed);
MSGLAB_DEFINE_ERROR(Irreversible);
MSGLAB_DEFINE_ERROR(AlreadyEncrypted);
MSGLAB_DEFINE_ERROR(NotTracked);
MSGLAB_DEFINE_ERROR(DuplicateUser);
MSGLAB_DEFINE_ERROR(BadProfile);

#undef MSGLAB_DEFINE_ERROR

}  // namespace msglab
